#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aide/affordance_space.hpp"
#include "aide/config.hpp"
#include "aide/ers.hpp"
#include "aide/exploration.hpp"
#include "aide/motion.hpp"
#include "aide/perception.hpp"
#include "aide/simulator.hpp"

namespace aide {

struct TaskInput {
  std::string instruction;
  SceneFrame frame;
};

struct PlannerState {
  Stream stream = Stream::ADM;
  std::optional<CandidatePool> pool;
  bool retrieved = false;
  bool novel = false;
  std::vector<std::string> subgoal_stack;
  double last_validity = 0.0;
  int episode_step = 0;
  EpisodeStatus status = EpisodeStatus::Running;
  FailureReason failure = FailureReason::None;

  bool msi_latched = false;                 // MSI already ran for the current failure
  bool awaiting_human = false;
  std::optional<std::string> human_label;   // overrides the reasoner's tool proposal
  std::optional<Region> last_container;     // last unseen region found
  std::vector<InstructionRecord> msi_records;
  int msi_runs = 0;
};

struct Validity {
  bool valid = false;
  double score = 0.0;
};

/// Best (confidence + pool similarity) over the top-N detections.
inline Validity validity_check(const MatchStats& stats, const ConfigParams& params) {
  Validity v;
  const std::size_t top = std::min({stats.detections.size(), stats.similarity.size(),
                                    static_cast<std::size_t>(params.top_n)});
  for (std::size_t i = 0; i < top; ++i) {
    v.score = std::max(v.score, stats.detections[i].confidence + stats.similarity[i]);
  }
  v.valid = top > 0 && v.score >= params.validity_threshold;
  return v;
}

/// Scores the detections against the pool and checks validity in one go.
inline Validity validity_check(const std::vector<Detection>& detections, const CandidatePool& pool,
                               const SceneFrame& frame, Perception& perception, const ConfigParams& params) {
  const auto images = pool.distinct_images();
  return validity_check(score_detections(detections, frame, images, params, perception), params);
}

inline bool needs_msi(bool novel, const Validity& validity) { return novel || !validity.valid; }

/// Result of the reasoning chain: either a grounded tool, or the exploration
/// it fell back to.
struct MsiOutcome {
  ToolHypothesis hypothesis;
  std::optional<GroundingResult> grounding;
  ExplorationOutcome exploration;
  MatchStats stats;
};

namespace planner {

inline RegionPair checked_segments(Perception& p, const Detection& tool, const SceneFrame& frame) {
  try {
    auto r = p.segment_regions(tool, frame);
    if (tool.box.contains(r.operational) && tool.box.contains(r.functional)) return r;
  } catch (const PerceptionError&) {
  }
  return split_regions(tool.box);
}

inline GroundingResult grounding_for(const ToolHypothesis& hyp, const Detection& det, const MediaRef& crop,
                                     const RegionPair& regions) {
  GroundingResult g;
  g.tool_label = hyp.label;
  g.tool_image = crop;
  g.tool_region = det.box;
  g.operational_region = regions.operational;
  g.functional_region = regions.functional;
  return g;
}

}  // namespace planner

/// Propose, detect, select, segment. Falls back to the exploration policy
/// when nothing in view matches the proposed tool.
inline MsiOutcome mm_cot(const TaskInput& task, const CandidatePool* pool, const ConfigParams& params,
                         Perception& perception, const std::optional<std::string>& human_label = std::nullopt) {
  MsiOutcome out;
  if (human_label) {
    out.hypothesis = ToolHypothesis{*human_label, {}};
  } else {
    out.hypothesis = perception.propose_tool(task.instruction, task.frame);
  }
  const auto& hyp = out.hypothesis;

  std::vector<MediaRef> images{MediaRef::text(hyp.label)};
  if (pool) {
    for (auto& img : pool->distinct_images()) images.push_back(std::move(img));
  }

  const std::vector<std::string> vocab{hyp.label};
  const auto dets = ers::safe_detect(perception, task.frame, vocab, params.top_n);
  if (!dets.empty()) {
    std::size_t idx = perception.select_candidate(hyp, dets, task.frame);
    if (idx >= dets.size()) idx = 0;
    const auto crop = ers::padded_crop(perception, task.frame, dets[idx].box);
    if (ers::best_similarity(perception, crop, images) > params.match_threshold) {
      out.grounding = planner::grounding_for(hyp, dets[idx], crop,
                                             planner::checked_segments(perception, dets[idx], task.frame));
      return out;
    }
  }

  // Nothing groundable at the top: route through the exploration policy.
  std::vector<std::string> wide_vocab{hyp.label};
  if (pool) {
    for (auto& l : pool->tool_labels())
      if (l != hyp.label) wide_vocab.push_back(l);
  }
  const int k = std::max(params.upper_candidate_rank(), params.top_n_prime);
  out.stats = score_detections(ers::safe_detect(perception, task.frame, wide_vocab, k), task.frame, images,
                               params, perception);
  const auto kind = choose_strategy(out.stats.s_max, out.stats.t_new, params);
  if (kind == ExplorationKind::None) {
    // Some other top-N candidate matches; take the best of them.
    std::size_t best = 0;
    const std::size_t top = std::min<std::size_t>(out.stats.similarity.size(), static_cast<std::size_t>(params.top_n));
    for (std::size_t i = 1; i < top; ++i)
      if (out.stats.similarity[i] > out.stats.similarity[best]) best = i;
    const auto& det = out.stats.detections[best];
    out.grounding = planner::grounding_for(hyp, det, out.stats.crops[best],
                                           planner::checked_segments(perception, det, task.frame));
    return out;
  }
  if (kind == ExplorationKind::Visible) {
    try {
      out.exploration = {ExplorationKind::Visible,
                         visible_explore(out.stats.detections, task.frame.width, task.frame.height, params),
                         std::nullopt};
      return out;
    } catch (const ExplorationImpossible&) {
    }
  }
  try {
    const auto u = invisible_explore(task.frame, task.instruction, pool, params, perception);
    out.exploration = {ExplorationKind::Invisible, u.region, u.label};
  } catch (const ExplorationImpossible&) {
  } catch (const ReasonerError&) {
  }
  return out;
}

/// Runs the reasoning chain and stores what it learned in the space. A tool
/// that could not be grounded is stored by name with the unseen region hint.
inline MsiOutcome run_msi(const TaskInput& task, RelationshipSpace& space, const CandidatePool* pool,
                          const ConfigParams& params, Perception& perception, InstructionRecord* inserted = nullptr,
                          const std::optional<std::string>& human_label = std::nullopt) {
  auto out = mm_cot(task, pool, params, perception, human_label);

  InstructionRecord rec;
  int n = static_cast<int>(space.record_count());
  do {
    rec.id = "msi-" + std::to_string(n++);
  } while (space.find(rec.id));
  rec.text = task.instruction;
  rec.instruction_affordance = perception.score_affordance(MediaRef::text(task.instruction));
  if (out.grounding) {
    rec.tool_affordance = perception.score_affordance(out.grounding->tool_image);
    rec.results.push_back(*out.grounding);
  } else {
    GroundingResult g;
    g.tool_label = out.hypothesis.label;
    g.tool_image = MediaRef::text(out.hypothesis.label);
    if (out.exploration.kind == ExplorationKind::Invisible && out.exploration.region) {
      g.unseen = UnseenHint{*out.exploration.label, perception.crop(task.frame, *out.exploration.region)};
    }
    rec.tool_affordance = perception.score_affordance(g.tool_image);
    rec.results.push_back(std::move(g));
  }
  const auto& stored = space.insert(std::move(rec));
  if (inserted) *inserted = stored;
  return out;
}

inline bool robot_near(const Region& region, const SceneFrame& frame, const ConfigParams& params) {
  const Camera cam{params.pixels_per_unit, frame.width, frame.height};
  return cam.distance_to(region) <= params.near_radius;
}

/// What the planner concluded this tick, before choosing a motion.
struct Decision {
  std::optional<GroundingResult> grounded;
  ExplorationOutcome exploration;
};

/// Maps a decision to a motion command, updating the subgoal stack and status.
inline MotionCommand decide_motion(const Decision& d, bool near, PlannerState& state, const ConfigParams& params) {
  if (d.grounded) {
    state.subgoal_stack.clear();
    if (near) {
      state.status = EpisodeStatus::Completed;
      return Manipulate{d.grounded->operational_region, d.grounded->functional_region};
    }
    return Approach{d.grounded->tool_region};
  }
  if (d.exploration.kind == ExplorationKind::Invisible && d.exploration.region) {
    if (!near) return Approach{*d.exploration.region};
    const std::string subgoal = "open the " + d.exploration.label.value_or("container");
    state.subgoal_stack.push_back(subgoal);
    if (static_cast<int>(state.subgoal_stack.size()) > params.max_subgoal_depth) {
      state.status = EpisodeStatus::Failed;
      state.failure = FailureReason::ReformulationLoop;
      return Idle{};
    }
    return Reformulate{subgoal, *d.exploration.region};
  }
  state.subgoal_stack.clear();
  if (d.exploration.kind == ExplorationKind::Visible && d.exploration.region) {
    return Approach{*d.exploration.region};
  }
  return Idle{};
}

struct TickResult {
  MotionCommand command;
  TraceEvent event;
};

namespace planner {

inline void refresh_pool(PlannerState& state, const std::string& instruction, const RelationshipSpace& space,
                         const ConfigParams& params, Perception& perception) {
  const auto vec = perception.score_affordance(MediaRef::text(instruction));
  auto r = retrieve_candidates(space, vec, params);
  state.retrieved = true;
  state.novel = r.novel();
  state.pool = std::move(r.pool);
  if (state.pool) {
    // Records learned by MSI stay available even when they landed elsewhere.
    for (const auto& rec : state.msi_records) {
      const bool present = std::any_of(state.pool->candidates.begin(), state.pool->candidates.end(),
                                       [&](const InstructionRecord& c) { return c.id == rec.id; });
      if (!present) {
        auto merged = state.pool->candidates;
        merged.push_back(rec);
        state.pool = make_pool(state.pool->anchor, std::move(merged));
      }
    }
  }
}

/// Exploration for an ADM tick that did not ground.
inline ExplorationOutcome explore(const TaskInput& task, const NeedsExploration& need, PlannerState& state,
                                  const ConfigParams& params, Perception& perception) {
  auto kind = choose_strategy(need.stats.s_max, need.stats.t_new, params);
  if (kind == ExplorationKind::Visible) {
    try {
      return {ExplorationKind::Visible,
              visible_explore(need.stats.detections, task.frame.width, task.frame.height, params), std::nullopt};
    } catch (const ExplorationImpossible&) {
      kind = ExplorationKind::Invisible;
    }
  }
  try {
    const auto u = invisible_explore(task.frame, task.instruction, &need.pool, params, perception);
    state.last_container = u.region;
    return {ExplorationKind::Invisible, u.region, u.label};
  } catch (const ExplorationImpossible&) {
  } catch (const ReasonerError&) {
  }
  if (state.last_container) {
    return {ExplorationKind::Invisible, state.last_container, std::string("container")};
  }
  return {};
}

}  // namespace planner

/// One planning tick over the current frame.
inline TickResult step(PlannerState& state, const TaskInput& task, RelationshipSpace& space,
                       const ConfigParams& params, Perception& perception) {
  TickResult out{Idle{}, {}};
  auto& ev = out.event;
  ev.step = state.episode_step++;
  ev.instruction = state.subgoal_stack.empty() ? task.instruction : state.subgoal_stack.back();

  auto finish = [&](MotionCommand cmd) {
    out.command = std::move(cmd);
    ev.command = out.command;
    ev.stream = state.stream;
    ev.status = state.status;
    ev.failure = state.failure;
    ev.subgoal_depth = static_cast<int>(state.subgoal_stack.size());
    return out;
  };

  if (state.status != EpisodeStatus::Running) return finish(Idle{});
  if (state.awaiting_human) return finish(RequestHuman{"Which tool should I use for: " + task.instruction + "?"});

  state.stream = Stream::ADM;
  if (!state.retrieved) planner::refresh_pool(state, task.instruction, space, params, perception);

  std::optional<MatchOutcome> adm;
  Validity validity;
  if (state.pool) {
    adm = match_tool(task.frame, *state.pool, params, perception);
    const auto& stats = std::visit([](const auto& o) -> const MatchStats& { return o.stats; }, *adm);
    validity = validity_check(stats, params);
    ev.s_max = stats.s_max;
    ev.t_new = stats.t_new;
  }
  ev.validity = validity.score;
  ev.valid = validity.valid;
  state.last_validity = validity.score;
  if (!state.novel && validity.valid) state.msi_latched = false;

  Decision decision;
  if (needs_msi(state.novel, validity) && !state.msi_latched) {
    state.stream = Stream::MSI;
    state.msi_latched = true;
    ++state.msi_runs;
    MsiOutcome msi;
    InstructionRecord stored;
    try {
      msi = run_msi(task, space, state.pool ? &*state.pool : nullptr, params, perception, &stored,
                    state.human_label);
    } catch (const ReasonerError& e) {
      state.awaiting_human = true;
      ev.note = e.what();
      return finish(RequestHuman{"Which tool should I use for: " + task.instruction + "?"});
    }
    state.msi_records.push_back(stored);
    planner::refresh_pool(state, task.instruction, space, params, perception);
    if (msi.grounding) {
      decision.grounded = msi.grounding;
    } else {
      decision.exploration = msi.exploration;
      if (msi.exploration.kind == ExplorationKind::Invisible) state.last_container = msi.exploration.region;
      if (msi.exploration.kind == ExplorationKind::None && state.last_container) {
        decision.exploration = {ExplorationKind::Invisible, state.last_container, std::string("container")};
      }
      ev.s_max = msi.stats.s_max;
      ev.t_new = msi.stats.t_new;
    }
  } else if (adm) {
    if (const auto* g = std::get_if<Grounded>(&*adm)) {
      decision.grounded = g->result;
    } else {
      decision.exploration = planner::explore(task, std::get<NeedsExploration>(*adm), state, params, perception);
    }
  }

  bool near = false;
  if (decision.grounded) {
    ev.tool_region = decision.grounded->tool_region;
    near = robot_near(decision.grounded->tool_region, task.frame, params);
  } else if (decision.exploration.region) {
    near = robot_near(*decision.exploration.region, task.frame, params);
  }
  ev.exploration = decision.grounded ? ExplorationKind::None : decision.exploration.kind;
  ev.exploration_region = decision.grounded ? std::nullopt : decision.exploration.region;
  ev.exploration_label = decision.grounded ? std::nullopt : decision.exploration.label;
  return finish(decide_motion(decision, near, state, params));
}

/// Hands the planner a human's answer to its last RequestHuman. No answer
/// fails the episode with `if_missing`.
inline void provide_human_answer(PlannerState& state, const std::optional<std::string>& label,
                                 FailureReason if_missing = FailureReason::PlanningError) {
  state.awaiting_human = false;
  if (!label || label->empty()) {
    state.status = EpisodeStatus::Failed;
    state.failure = if_missing;
    return;
  }
  state.human_label = *label;
  state.msi_latched = false;
}

struct HumanAnswer {
  std::optional<std::string> label;
  bool abort = false;
};

using HumanResponder = std::function<HumanAnswer(const World&, const std::string& instruction, const std::string& prompt)>;

/// Answers from the world's hint table; never blocks.
inline HumanAnswer batch_responder(const World& world, const std::string& instruction, const std::string&) {
  const auto it = world.tables.human.find(instruction);
  if (it == world.tables.human.end()) return {};
  return {it->second, false};
}

/// observe, step, apply until the episode ends or `max_steps` ticks pass.
inline EpisodeTrace run_closed_loop(const std::string& instruction, World& world, RelationshipSpace& space,
                                    const ConfigParams& params, Perception& perception, int max_steps = 60,
                                    const HumanResponder& responder = batch_responder) {
  using clock = std::chrono::steady_clock;
  const auto opts = SimOptions::from(params);
  EpisodeTrace trace;
  trace.world_id = world.id;
  trace.instruction = instruction;
  world.active_task = instruction;
  PlannerState state;
  const auto start = clock::now();
  for (int i = 0; i < max_steps && state.status == EpisodeStatus::Running; ++i) {
    const auto frame = observe(world, opts);
    const auto t0 = clock::now();
    auto tick = step(state, TaskInput{instruction, frame}, space, params, perception);
    tick.event.latency_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    tick.event.truth = annotate(world);
    const auto warning = apply(world, tick.command, opts);
    if (!warning.empty()) tick.event.note += (tick.event.note.empty() ? "" : "; ") + warning;
    if (const auto* ask = std::get_if<RequestHuman>(&tick.command)) {
      const auto answer = responder(world, instruction, ask->prompt);
      provide_human_answer(state, answer.label, answer.abort ? FailureReason::HumanAbort : FailureReason::PlanningError);
      tick.event.status = state.status;
      tick.event.failure = state.failure;
    }
    trace.events.push_back(std::move(tick.event));
  }
  if (state.status == EpisodeStatus::Running) {
    state.status = EpisodeStatus::Failed;
    state.failure = FailureReason::Timeout;
  }
  trace.status = state.status;
  trace.failure = state.failure;
  trace.physical_success = world.physical_success;
  trace.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return trace;
}

/// Convenience wrapper owning the state of one episode.
class Planner {
 public:
  Planner(RelationshipSpace& space, ConfigParams params, Perception& perception)
      : space_(space), params_(std::move(params)), perception_(perception) {}

  TickResult step(const TaskInput& task) { return aide::step(state_, task, space_, params_, perception_); }
  void provide_human_answer(const std::optional<std::string>& label,
                            FailureReason if_missing = FailureReason::PlanningError) {
    aide::provide_human_answer(state_, label, if_missing);
  }
  const PlannerState& state() const { return state_; }
  void reset() { state_ = PlannerState{}; }

 private:
  RelationshipSpace& space_;
  ConfigParams params_;
  Perception& perception_;
  PlannerState state_;
};

}  // namespace aide
