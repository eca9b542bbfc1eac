#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aide/config.hpp"
#include "aide/ers.hpp"
#include "aide/motion.hpp"
#include "aide/perception.hpp"

namespace aide {

struct ExplorationOutcome {
  ExplorationKind kind = ExplorationKind::None;
  std::optional<Region> region;
  std::optional<std::string> label;

  bool well_formed() const {
    if (kind == ExplorationKind::None) return !region;
    if (!region) return false;
    return kind != ExplorationKind::Invisible || label.has_value();
  }
};

inline ExplorationKind choose_strategy(double s_max, double t_new, const ConfigParams& params) {
  if (s_max > params.match_threshold) return ExplorationKind::None;
  if (t_new > params.strategy_threshold) return ExplorationKind::Visible;
  return ExplorationKind::Invisible;
}

/// Square of half-side `half` around the centre of `box`, clipped to the frame.
inline Region square_around(const Region& box, int half, std::int32_t width, std::int32_t height) {
  const std::int32_t cx = (box.x_min + box.x_max) / 2;
  const std::int32_t cy = (box.y_min + box.y_max) / 2;
  return clip_to_frame(Region{cx - half, cy - half, cx + half, cy + half}, width, height);
}

/// Weighted square-region search over the low-confidence detections. Each
/// candidate (ranks N+1..upper) anchors a square; detections ranked N+1..N'
/// touching the square add N' - rank. The best square, grown to cover its
/// contributors, is the region to approach.
inline Region visible_explore(std::span<const Detection> detections, std::int32_t width, std::int32_t height,
                              const ConfigParams& params) {
  const int n = params.top_n;
  const int np = params.top_n_prime;
  const int upper = params.upper_candidate_rank();

  const Detection* best = nullptr;
  Region best_square;
  long best_weight = -1;
  for (const auto& cand : detections) {
    if (cand.rank <= n || cand.rank > upper) continue;
    const Region sq = square_around(cand.box, params.square_half_side, width, height);
    long weight = 0;
    for (const auto& d : detections) {
      if (d.rank <= n || d.rank > np) continue;
      if (d.box.intersects(sq)) weight += np - d.rank;
    }
    const bool better = !best || weight > best_weight ||
                        (weight == best_weight &&
                         (cand.rank < best->rank || (cand.rank == best->rank && cand.box.x_min < best->box.x_min)));
    if (better) {
      best = &cand;
      best_square = sq;
      best_weight = weight;
    }
  }
  if (!best) throw ExplorationImpossible("no detections ranked past the top N");

  Region out = best_square;
  for (const auto& d : detections) {
    if (d.rank <= n || d.rank > np) continue;
    if (d.box.intersects(best_square)) out = bounding_union(out, d.box);
  }
  return clip_to_frame(out, width, height);
}

struct UnseenRegion {
  Region region;
  std::string label;
};

/// Finds the container the tool is probably hidden in. The label comes from
/// the pool's unseen hints when there are any, otherwise from the reasoner.
inline UnseenRegion invisible_explore(const SceneFrame& frame, std::string_view instruction,
                                      const CandidatePool* pool, const ConfigParams& params,
                                      Perception& perception) {
  std::string label;
  std::vector<MediaRef> hint_images;
  if (pool && !pool->unseen_hints.empty()) {
    std::set<std::string> labels;
    for (const auto& h : pool->unseen_hints) labels.insert(h.label);
    double best = -1.0;
    const auto query = MediaRef::text(instruction);
    for (const auto& l : labels) {
      const double s = perception.similarity(query, MediaRef::text(l)).value();
      if (s > best) {
        best = s;
        label = l;
      }
    }
    std::set<std::string> seen;
    for (const auto& h : pool->unseen_hints)
      if (h.label == label && seen.insert(h.image.uri).second) hint_images.push_back(h.image);
  } else {
    label = perception.infer_unseen_label(instruction, frame);
  }

  const std::vector<std::string> vocab{label};
  const auto dets = ers::safe_detect(perception, frame, vocab, params.top_n);
  if (dets.empty()) throw ExplorationImpossible("no " + label + " in view");

  std::size_t pick = 0;
  double score = 0.0;
  if (!hint_images.empty()) {
    score = -1.0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const double s = ers::best_similarity(perception, ers::padded_crop(perception, frame, dets[i].box), hint_images);
      if (s > score) {
        score = s;
        pick = i;
      }
    }
  } else {
    pick = perception.select_candidate(ToolHypothesis{label, {}}, dets, frame);
    if (pick >= dets.size()) pick = 0;
    const std::vector<MediaRef> text{MediaRef::text(label)};
    score = ers::best_similarity(perception, ers::padded_crop(perception, frame, dets[pick].box), text);
  }
  if (score < params.region_accept_threshold) throw ExplorationImpossible("no " + label + " in view");
  return {dets[pick].box, label};
}

}  // namespace aide
