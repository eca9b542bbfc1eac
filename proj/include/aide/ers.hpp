#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aide/affordance_space.hpp"
#include "aide/config.hpp"
#include "aide/perception.hpp"

namespace aide {

/// Retrieved neighbourhood of an instruction: the anchor record, its
/// subcluster neighbours within d, and their images and unseen hints.
struct CandidatePool {
  InstructionRecord anchor;
  std::vector<InstructionRecord> candidates;
  std::vector<std::pair<std::string, MediaRef>> tool_images;  // (record id, image)
  std::vector<UnseenHint> unseen_hints;

  /// Distinct tool images, in first-seen order.
  std::vector<MediaRef> distinct_images() const {
    std::vector<MediaRef> out;
    std::set<std::string> seen;
    for (const auto& [id, img] : tool_images)
      if (seen.insert(img.uri).second) out.push_back(img);
    return out;
  }

  /// Distinct tool labels, sorted.
  std::vector<std::string> tool_labels() const {
    std::set<std::string> labels;
    for (const auto& r : candidates)
      for (const auto& g : r.results) labels.insert(g.tool_label);
    return {labels.begin(), labels.end()};
  }

  /// Operational ("op") or functional ("fn") exemplar crops of every result.
  std::vector<MediaRef> exemplars(std::string_view tag) const {
    std::vector<MediaRef> out;
    std::set<std::string> seen;
    for (const auto& r : candidates) {
      for (const auto& g : r.results) {
        const auto& region = tag == "op" ? g.operational_region : g.functional_region;
        auto ref = region_crop(g.tool_image, region, tag);
        if (seen.insert(ref.uri).second) out.push_back(std::move(ref));
      }
    }
    return out;
  }
};

inline CandidatePool make_pool(InstructionRecord anchor, std::vector<InstructionRecord> candidates) {
  CandidatePool pool;
  pool.anchor = std::move(anchor);
  pool.candidates = std::move(candidates);
  for (const auto& r : pool.candidates) {
    for (const auto& g : r.results) {
      pool.tool_images.emplace_back(r.id, g.tool_image);
      if (g.unseen) pool.unseen_hints.push_back(*g.unseen);
    }
  }
  return pool;
}

struct Retrieval {
  std::optional<CandidatePool> pool;  // empty: nothing within c, the task is novel
  std::size_t visited = 0;
  bool novel() const { return !pool.has_value(); }
};

inline Retrieval retrieve_candidates(const RelationshipSpace& space, const AffordanceVector& instr_vec,
                                     const ConfigParams& params) {
  Retrieval out;
  const auto hit = space.dfs_retrieve(instr_vec, params.retrieve_radius);
  out.visited = hit.visited_count;
  if (!hit.found()) return out;
  auto cands = space.candidate_set(*hit.record, params.candidate_radius);
  out.pool = make_pool(*hit.record, std::move(cands));
  return out;
}

/// Detections of one frame with each one's best similarity to the pool.
struct MatchStats {
  std::vector<Detection> detections;  // up to max(2N, N') entries
  std::vector<double> similarity;     // best pool similarity, top-2N only
  std::vector<MediaRef> crops;        // crop refs, top-2N only
  double s_max = 0.0;
  double t_new = 0.0;
};

struct Grounded {
  GroundingResult result;
  Detection tool;
  MatchStats stats;
};

struct NeedsExploration {
  CandidatePool pool;
  MatchStats stats;
};

using MatchOutcome = std::variant<Grounded, NeedsExploration>;

namespace ers {

inline std::vector<Detection> safe_detect(Perception& p, const SceneFrame& frame,
                                          std::span<const std::string> vocabulary, int k) {
  try {
    return p.detect(frame, vocabulary, k);
  } catch (const PerceptionError&) {
    return {};
  }
}

inline double best_similarity(Perception& p, const MediaRef& crop, std::span<const MediaRef> images) {
  double best = 0.0;
  for (const auto& img : images) {
    try {
      best = std::max(best, p.similarity(crop, img).value());
    } catch (const PerceptionError&) {
    }
  }
  return best;
}

/// Crop used for similarity: the box padded 5% per side, clipped to the frame.
inline MediaRef padded_crop(Perception& p, const SceneFrame& frame, const Region& box) {
  return p.crop(frame, pad_region(box, 0.05, frame.width, frame.height));
}

}  // namespace ers

/// Scores every detection in the top 2N against `images`, filling S_max over
/// the top N and T_new over the top 2N.
inline MatchStats score_detections(std::vector<Detection> detections, const SceneFrame& frame,
                                   std::span<const MediaRef> images, const ConfigParams& params,
                                   Perception& perception) {
  MatchStats st;
  st.detections = std::move(detections);
  const std::size_t upper = std::min<std::size_t>(st.detections.size(),
                                                  static_cast<std::size_t>(params.upper_candidate_rank()));
  for (std::size_t i = 0; i < upper; ++i) {
    st.crops.push_back(ers::padded_crop(perception, frame, st.detections[i].box));
    st.similarity.push_back(ers::best_similarity(perception, st.crops.back(), images));
    if (static_cast<int>(i) < params.top_n) st.s_max = std::max(st.s_max, st.similarity.back());
    st.t_new = std::max(st.t_new, st.similarity.back());
  }
  return st;
}

/// Operational and functional regions of a grounded tool, found by part
/// detection inside its box and exemplar matching; falls back to the
/// segmenter when no parts are found.
inline RegionPair ground_regions(const SceneFrame& frame, const Detection& tool, const CandidatePool* pool,
                                 const ConfigParams& params, Perception& perception) {
  auto fallback = [&] {
    try {
      auto r = perception.segment_regions(tool, frame);
      if (tool.box.contains(r.operational) && tool.box.contains(r.functional)) return r;
    } catch (const PerceptionError&) {
    }
    return split_regions(tool.box);
  };
  if (!pool || tool.box.area() == 0) return fallback();
  const auto op_ex = pool->exemplars("op");
  const auto fn_ex = pool->exemplars("fn");
  if (op_ex.empty() || fn_ex.empty()) return fallback();

  const SceneFrame sub = frame.crop(tool.box);
  const std::vector<std::string> parts{"handle", "body"};
  const auto dets = ers::safe_detect(perception, sub, parts, params.top_n_prime);
  if (dets.size() < 2) return fallback();

  std::size_t best_op = 0, best_fn = 0;
  double op_score = -1.0, fn_score = -1.0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto ref = perception.crop(sub, dets[i].box);
    const double so = ers::best_similarity(perception, ref, op_ex);
    const double sf = ers::best_similarity(perception, ref, fn_ex);
    if (so > op_score) {
      op_score = so;
      best_op = i;
    }
    if (sf > fn_score) {
      fn_score = sf;
      best_fn = i;
    }
  }
  if (best_op == best_fn) return fallback();
  const auto op = intersection(sub.to_parent(dets[best_op].box), tool.box);
  const auto fn = intersection(sub.to_parent(dets[best_fn].box), tool.box);
  if (!op || !fn) return fallback();
  return {*op, *fn};
}

/// Detect-and-match against the pool. Grounded iff S_max > m.
inline MatchOutcome match_tool(const SceneFrame& frame, const CandidatePool& pool, const ConfigParams& params,
                               Perception& perception) {
  const auto vocab = pool.tool_labels();
  const int k = std::max(params.upper_candidate_rank(), params.top_n_prime);
  auto dets = vocab.empty() ? std::vector<Detection>{} : ers::safe_detect(perception, frame, vocab, k);
  const auto images = pool.distinct_images();
  auto st = score_detections(std::move(dets), frame, images, params, perception);

  if (st.s_max > params.match_threshold) {
    std::size_t best = 0;
    const std::size_t top = std::min<std::size_t>(st.similarity.size(), static_cast<std::size_t>(params.top_n));
    for (std::size_t i = 1; i < top; ++i)
      if (st.similarity[i] > st.similarity[best]) best = i;
    const Detection tool = st.detections[best];
    const auto regions = ground_regions(frame, tool, &pool, params, perception);
    GroundingResult g;
    g.tool_label = tool.label;
    g.tool_image = st.crops[best];
    g.tool_region = tool.box;
    g.operational_region = regions.operational;
    g.functional_region = regions.functional;
    return Grounded{std::move(g), tool, std::move(st)};
  }
  return NeedsExploration{pool, std::move(st)};
}

struct Novel {};

using ErsResult = std::variant<Novel, MatchOutcome>;

/// Retrieval followed by matching, in that order.
inline ErsResult ers_pipeline(const SceneFrame& frame, std::string_view instruction, const RelationshipSpace& space,
                              const ConfigParams& params, Perception& perception) {
  const auto vec = perception.score_affordance(MediaRef::text(instruction));
  const auto retrieval = retrieve_candidates(space, vec, params);
  if (retrieval.novel()) return Novel{};
  return match_tool(frame, *retrieval.pool, params, perception);
}

}  // namespace aide
