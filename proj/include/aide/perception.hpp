#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aide/affordance_space.hpp"
#include "aide/errors.hpp"
#include "aide/geometry.hpp"
#include "aide/media.hpp"

namespace aide {

/// Labeled box with its confidence rank inside one detection response.
struct Detection {
  std::string label;
  Region box;
  double confidence = 0.0;
  int rank = 1;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Ranks 1..K without gaps, confidence non-increasing in rank.
inline bool ranks_consistent(std::span<const Detection> dets) {
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].rank != static_cast<int>(i) + 1) return false;
    if (dets[i].confidence < 0.0 || dets[i].confidence > 1.0) return false;
    if (i > 0 && dets[i].confidence > dets[i - 1].confidence) return false;
  }
  return true;
}

/// Similarity clamped into [0, 1 - epsilon].
class SimilarityScore {
 public:
  static constexpr double kEpsilon = 1e-6;
  static constexpr double kMax = 1.0 - kEpsilon;

  constexpr SimilarityScore() = default;
  constexpr explicit SimilarityScore(double v) : value_(std::clamp(v, 0.0, kMax)) {}

  constexpr double value() const { return value_; }
  friend constexpr auto operator<=>(const SimilarityScore&, const SimilarityScore&) = default;

 private:
  double value_ = 0.0;
};

/// One item of the simulator's ground feed. Mock backends read these in
/// place of pixels; remote backends ignore them.
struct RasterEntry {
  std::string object_id;
  std::string label;           // object label, or the part name for parts
  std::string affordance_class;
  std::string part;            // empty for whole objects, else "handle" / "body"
  Region box;
  double distance = 0.0;       // world units from the robot
  bool blurred = false;
  friend bool operator==(const RasterEntry&, const RasterEntry&) = default;
};

struct SyntheticRaster {
  std::vector<RasterEntry> entries;
};

/// An observation, or a crop of one. `origin_x/y` locate this frame inside
/// the full camera frame so crop-local boxes can be mapped back.
struct SceneFrame {
  MediaRef image;
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::int64_t timestamp_ms = 0;
  std::int32_t origin_x = 0;
  std::int32_t origin_y = 0;
  std::shared_ptr<const SyntheticRaster> raster;

  Region bounds() const { return Region{0, 0, width, height}; }

  /// Sub-frame covering `roi` (in this frame's pixels, clipped to it).
  SceneFrame crop(const Region& roi) const {
    const Region r = clip_to_frame(roi, width, height);
    SceneFrame out;
    out.image = MediaRef::image(image.uri + "#crop=" + std::to_string(r.x_min) + "," +
                                std::to_string(r.y_min) + "," + std::to_string(r.x_max) + "," +
                                std::to_string(r.y_max));
    out.width = std::max(1, r.width());
    out.height = std::max(1, r.height());
    out.timestamp_ms = timestamp_ms;
    out.origin_x = origin_x + r.x_min;
    out.origin_y = origin_y + r.y_min;
    if (raster) {
      auto sub = std::make_shared<SyntheticRaster>();
      for (const auto& e : raster->entries) {
        const auto overlap = intersection(e.box, r);
        if (!overlap || overlap->area() == 0) continue;
        RasterEntry moved = e;
        moved.box = Region{overlap->x_min - r.x_min, overlap->y_min - r.y_min,
                           overlap->x_max - r.x_min, overlap->y_max - r.y_min};
        sub->entries.push_back(std::move(moved));
      }
      out.raster = std::move(sub);
    }
    return out;
  }

  /// Maps a box in this frame's coordinates to the full camera frame.
  Region to_parent(const Region& r) const {
    return Region{r.x_min + origin_x, r.y_min + origin_y, r.x_max + origin_x, r.y_max + origin_y};
  }
};

struct ToolHypothesis {
  std::string label;
  std::vector<std::string> attributes;
};

struct RegionPair {
  Region operational;
  Region functional;
};

/// Scripted reasoner answers that ship with each scenario.
struct ScenarioTables {
  std::map<std::string, std::string> tool;       // instruction -> tool label
  std::map<std::string, std::string> container;  // instruction -> container label
  std::map<std::string, std::string> human;      // instruction -> label a human would give
};

/// Crop of a stored image restricted to one of its regions; `tag` is "op"
/// or "fn". Used to build operational/functional exemplars.
inline MediaRef region_crop(const MediaRef& image, const Region& r, std::string_view tag) {
  return MediaRef::image(image.uri + "#" + std::string(tag) + "=" + std::to_string(r.x_min) + "," +
                         std::to_string(r.y_min) + "," + std::to_string(r.x_max) + "," +
                         std::to_string(r.y_max));
}

/// Lower half operational, upper half functional; boxes under two pixels
/// tall are returned whole for both.
inline RegionPair split_regions(const Region& box) {
  if (box.height() < 2) return {box, box};
  const std::int32_t mid = box.y_min + box.height() / 2;
  return {Region{box.x_min, mid, box.x_max, box.y_max}, Region{box.x_min, box.y_min, box.x_max, mid}};
}

/// Detector, embedder, reasoner and segmenter capabilities. Implementations
/// must tolerate concurrent calls.
class Perception {
 public:
  virtual ~Perception() = default;

  /// At most k detections for the vocabulary, ranked by confidence.
  virtual std::vector<Detection> detect(const SceneFrame& frame,
                                        std::span<const std::string> vocabulary, int k) = 0;
  virtual SimilarityScore similarity(const MediaRef& a, const MediaRef& b) = 0;
  virtual ToolHypothesis propose_tool(std::string_view instruction, const SceneFrame& frame) = 0;
  virtual std::size_t select_candidate(const ToolHypothesis& hypothesis,
                                       std::span<const Detection> candidates,
                                       const SceneFrame& frame) = 0;
  virtual RegionPair segment_regions(const Detection& tool, const SceneFrame& frame) = 0;
  virtual AffordanceVector score_affordance(const MediaRef& subject) = 0;
  virtual std::string infer_unseen_label(std::string_view instruction,
                                         const SceneFrame& frame) = 0;
  /// Reference to the pixels of `box` in `frame`, usable in similarity().
  virtual MediaRef crop(const SceneFrame& frame, const Region& box) = 0;
};

}  // namespace aide
