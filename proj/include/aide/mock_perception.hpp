#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aide/catalog.hpp"
#include "aide/noise.hpp"
#include "aide/perception.hpp"

namespace aide {

struct MockSettings {
  std::uint64_t seed = 0;
  double affordance_sigma = 0.0;
  double detection_sigma = 0.0;
  double similarity_sigma = 0.0;
  double decay = 5.0;            // lambda, world units
  double blur_factor = 0.4;
  std::size_t dims = 19;

  /// One knob for everything: affordance noise sigma, with detector and
  /// embedder noise scaled down from it.
  static MockSettings from_noise(double sigma, std::uint64_t seed, std::size_t dims = 19) {
    MockSettings s;
    s.seed = seed;
    s.affordance_sigma = sigma;
    s.detection_sigma = 0.02 * sigma;
    s.similarity_sigma = 0.04 * sigma;
    s.dims = dims;
    return s;
  }
};

namespace mock {

inline bool is_part_name(std::string_view s) { return s == "handle" || s == "body"; }

/// What a reference denotes, as far as the mock models are concerned.
struct Entity {
  enum class Kind { Thing, Instruction, Unknown };
  Kind kind = Kind::Unknown;
  std::string cls;        // affordance class (tool class for instructions)
  std::string part;       // "", "handle" or "body"
  std::string container;  // instructions only: where the tool is kept
  bool blurred = false;
};

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

/// Crop reference encoding the ground truth it was cut from.
inline MediaRef crop_ref(const RasterEntry& e) {
  return MediaRef::image("mock:" + e.object_id + "|" + e.label + "|" + e.affordance_class + "|" +
                         e.part + "|" + (e.blurred ? "1" : "0"));
}

inline std::vector<std::string> attributes_of(std::string_view cls) {
  static const std::map<std::string, std::vector<std::string>, std::less<>> table = {
      {"drinking", {"graspable", "holds liquid"}},  {"cleaning", {"graspable", "bristled"}},
      {"striking", {"graspable", "heavy head"}},    {"sealing", {"handheld", "adhesive"}},
      {"support", {"soft", "cushioned"}},           {"cutting", {"graspable", "sharp edge"}},
      {"heating", {"handheld", "heat source"}},     {"writing", {"graspable", "leaves marks"}},
      {"fridge", {"openable", "keeps things cold"}}, {"drawer", {"openable", "sliding"}},
      {"cabinet", {"openable", "hinged door"}},     {"toolbox", {"openable", "portable"}},
      {"closet", {"openable", "tall"}}};
  if (auto it = table.find(cls); it != table.end()) return it->second;
  return {"graspable"};
}

}  // namespace mock

/// Deterministic perception driven by the simulator's ground feed and the
/// scenario tables. All randomness is a pure function of the seed and the
/// call content, so concurrent use needs no locking.
class MockPerception : public Perception {
 public:
  explicit MockPerception(ScenarioTables tables = {}, MockSettings settings = {})
      : tables_(std::move(tables)), settings_(settings) {}

  const MockSettings& settings() const { return settings_; }
  const ScenarioTables& tables() const { return tables_; }

  std::vector<Detection> detect(const SceneFrame& frame, std::span<const std::string> vocabulary,
                                int k) override {
    if (k < 1) throw PerceptionError("detect: k must be at least 1");
    std::vector<Detection> out;
    if (!frame.raster || vocabulary.empty()) return out;
    const bool part_mode = std::any_of(vocabulary.begin(), vocabulary.end(),
                                       [](const std::string& v) { return mock::is_part_name(v); });
    std::uint64_t vocab_key = 0;
    for (const auto& v : vocabulary) vocab_key = noise::combine(vocab_key, noise::hash_string(v));

    struct Scored {
      Detection det;
      std::string tiebreak;
    };
    std::vector<Scored> scored;
    for (const auto& e : frame.raster->entries) {
      if (part_mode != !e.part.empty()) continue;
      const auto [base, label] = label_match(e, vocabulary);
      const double vis = e.blurred ? settings_.blur_factor : 1.0;
      double conf = base * vis * std::exp(-e.distance / settings_.decay);
      if (settings_.detection_sigma > 0.0) {
        const auto key = noise::combine(
            noise::combine(noise::combine(settings_.seed, static_cast<std::uint64_t>(frame.timestamp_ms)),
                           noise::hash_string(e.object_id + "/" + e.part)),
            vocab_key);
        conf += settings_.detection_sigma * noise::gaussian(key);
      }
      conf = std::clamp(conf, 0.0, 1.0);
      if (conf <= 0.0) continue;
      scored.push_back({Detection{label, e.box, conf, 0}, e.object_id + "/" + e.part});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.det.confidence != b.det.confidence) return a.det.confidence > b.det.confidence;
      return a.tiebreak < b.tiebreak;
    });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    out.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
      scored[i].det.rank = static_cast<int>(i) + 1;
      out.push_back(std::move(scored[i].det));
    }
    return out;
  }

  SimilarityScore similarity(const MediaRef& a, const MediaRef& b) override {
    if (a == b) return SimilarityScore(1.0);
    const auto ea = resolve(a);
    const auto eb = resolve(b);
    double v = 0.95;
    if (!matches(ea, eb)) v -= 0.5;
    v -= 0.05 * ((ea.blurred ? 1 : 0) + (eb.blurred ? 1 : 0));
    if (settings_.similarity_sigma > 0.0) {
      const auto& lo = std::min(a.uri, b.uri);
      const auto& hi = std::max(a.uri, b.uri);
      const auto key = noise::combine(noise::combine(settings_.seed ^ 0x5157ULL, noise::hash_string(lo)),
                                      noise::hash_string(hi));
      v += settings_.similarity_sigma * noise::gaussian(key);
    }
    return SimilarityScore(v);
  }

  ToolHypothesis propose_tool(std::string_view instruction, const SceneFrame&) override {
    if (instruction.empty()) throw ReasonerError("propose_tool: empty instruction");
    const auto it = tables_.tool.find(std::string(instruction));
    if (it == tables_.tool.end()) {
      throw ReasonerError("no tool known for instruction '" + std::string(instruction) + "'");
    }
    const auto cls = catalog::class_of_label(it->second);
    return ToolHypothesis{it->second, mock::attributes_of(cls.value_or(""))};
  }

  std::size_t select_candidate(const ToolHypothesis& hypothesis,
                               std::span<const Detection> candidates,
                               const SceneFrame& frame) override {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto* e = ground_truth(frame, candidates[i].box, false);
      if (e && e->label == hypothesis.label) return i;
    }
    return 0;
  }

  RegionPair segment_regions(const Detection& tool, const SceneFrame& frame) override {
    const auto* obj = ground_truth(frame, tool.box, false);
    if (obj && frame.raster) {
      std::optional<Region> handle, body;
      for (const auto& e : frame.raster->entries) {
        if (e.object_id != obj->object_id || e.part.empty()) continue;
        const auto clipped = intersection(e.box, tool.box);
        if (!clipped || clipped->area() == 0) continue;
        if (e.part == "handle") handle = clipped;
        if (e.part == "body") body = clipped;
      }
      if (handle && body) return {*handle, *body};
    }
    return split_regions(tool.box);
  }

  AffordanceVector score_affordance(const MediaRef& subject) override {
    const auto e = resolve(subject);
    const auto* cls = e.cls.empty() ? nullptr : catalog::find_class(e.cls);
    if (!cls) return AffordanceVector::uniform(settings_.dims, 5.0);
    auto v = catalog::centroid_of(*cls, settings_.dims).scores();
    if (settings_.affordance_sigma > 0.0) {
      const auto base = noise::combine(settings_.seed ^ 0xaffULL, noise::hash_string(subject.uri));
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] += settings_.affordance_sigma * noise::gaussian(noise::combine(base, i));
      }
    }
    return AffordanceVector::clamped(std::move(v));
  }

  std::string infer_unseen_label(std::string_view instruction, const SceneFrame&) override {
    const auto it = tables_.container.find(std::string(instruction));
    if (it == tables_.container.end()) {
      throw ReasonerError("no container known for instruction '" + std::string(instruction) + "'");
    }
    return it->second;
  }

  MediaRef crop(const SceneFrame& frame, const Region& box) override {
    const RasterEntry* best = nullptr;
    double best_iou = 0.3;
    if (frame.raster) {
      for (const auto& e : frame.raster->entries) {
        const double o = iou(e.box, box);
        if (o > best_iou) {
          best_iou = o;
          best = &e;
        }
      }
    }
    if (best) return mock::crop_ref(*best);
    return MediaRef::image("mock:none||||0");
  }

  /// Interprets a reference. Throws PerceptionError when it is not one the
  /// mock understands.
  mock::Entity resolve(const MediaRef& ref) const {
    using mock::Entity;
    Entity e;
    if (ref.is_text()) {
      const std::string body(ref.text_body());
      if (auto cls = catalog::class_of_label(body)) {
        e.kind = Entity::Kind::Thing;
        e.cls = *cls;
        return e;
      }
      if (mock::is_part_name(body)) {
        e.kind = Entity::Kind::Thing;
        e.part = body;
        return e;
      }
      const auto tool = tables_.tool.find(body);
      const auto box = tables_.container.find(body);
      if (tool != tables_.tool.end() || box != tables_.container.end()) {
        e.kind = Entity::Kind::Instruction;
        if (tool != tables_.tool.end()) e.cls = catalog::class_of_label(tool->second).value_or("");
        if (box != tables_.container.end()) e.container = box->second;
        return e;
      }
      for (const auto& cls : catalog::tool_classes()) {
        for (auto phrase : cls.phrases) {
          if (phrase == body) {
            e.kind = Entity::Kind::Instruction;
            e.cls = std::string(cls.name);
            return e;
          }
        }
      }
      return e;  // unknown text: still a valid, if uninformative, subject
    }

    std::string_view uri = ref.uri;
    std::string fragment;
    if (const auto hash = uri.find('#'); hash != std::string_view::npos) {
      fragment = std::string(uri.substr(hash + 1));
      uri = uri.substr(0, hash);
    }
    if (uri.starts_with("catalog:")) {
      const auto label = uri.substr(8);
      e.kind = Entity::Kind::Thing;
      e.cls = catalog::class_of_label(label).value_or("");
    } else if (uri.starts_with("mock:")) {
      const auto f = mock::split(uri.substr(5), '|');
      if (f.size() != 5) throw PerceptionError("malformed mock reference: " + ref.uri);
      e.kind = f[0] == "none" ? Entity::Kind::Unknown : Entity::Kind::Thing;
      e.cls = f[2];
      e.part = f[3];
      e.blurred = f[4] == "1";
    } else {
      throw PerceptionError("unresolvable reference: " + ref.uri);
    }
    if (fragment.starts_with("op=")) e.part = "handle";
    if (fragment.starts_with("fn=")) e.part = "body";
    return e;
  }

 private:
  static bool matches(const mock::Entity& a, const mock::Entity& b) {
    using K = mock::Entity::Kind;
    if (a.kind == K::Unknown || b.kind == K::Unknown) return false;
    if (a.kind == K::Instruction && b.kind == K::Instruction) {
      return !a.cls.empty() && a.cls == b.cls;
    }
    if (a.kind == K::Instruction || b.kind == K::Instruction) {
      const auto& ins = a.kind == K::Instruction ? a : b;
      const auto& thing = a.kind == K::Instruction ? b : a;
      if (catalog::is_container_label(thing.cls)) {
        if (!ins.container.empty()) return ins.container == thing.cls;
        const auto* cls = catalog::find_class(ins.cls);
        if (!cls) return false;
        return std::find(cls->containers.begin(), cls->containers.end(), thing.cls) !=
               cls->containers.end();
      }
      return !ins.cls.empty() && ins.cls == thing.cls;
    }
    if (a.part != b.part) return false;
    if (a.cls.empty() || b.cls.empty()) return a.cls.empty() && b.cls.empty() && !a.part.empty();
    return a.cls == b.cls;
  }

  static std::pair<double, std::string> label_match(const RasterEntry& e,
                                                    std::span<const std::string> vocabulary) {
    for (const auto& v : vocabulary)
      if (v == e.label) return {1.0, v};
    for (const auto& v : vocabulary) {
      const auto cls = catalog::class_of_label(v);
      if (cls && *cls == e.affordance_class) return {0.5, v};
    }
    return {0.15, vocabulary.front()};
  }

  static const RasterEntry* ground_truth(const SceneFrame& frame, const Region& box, bool parts) {
    if (!frame.raster) return nullptr;
    const RasterEntry* best = nullptr;
    double best_iou = 0.5;
    for (const auto& e : frame.raster->entries) {
      if (parts == e.part.empty()) continue;
      const double o = iou(e.box, box);
      if (o >= best_iou) {
        if (best && o == best_iou) continue;
        best_iou = o;
        best = &e;
      }
    }
    return best;
  }

  ScenarioTables tables_;
  MockSettings settings_;
};

}  // namespace aide
