#pragma once

#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aide/affordance_space.hpp"
#include "aide/geometry.hpp"

namespace aide {

struct Approach {
  Region region;
  friend bool operator==(const Approach&, const Approach&) = default;
};

struct Reformulate {
  std::string subgoal;
  Region key_region;
  friend bool operator==(const Reformulate&, const Reformulate&) = default;
};

struct Manipulate {
  Region operational;
  Region functional;
  friend bool operator==(const Manipulate&, const Manipulate&) = default;
};

struct RequestHuman {
  std::string prompt;
  friend bool operator==(const RequestHuman&, const RequestHuman&) = default;
};

// Nothing to do this tick: finished or failed episodes, or no usable target.
struct Idle {
  friend bool operator==(const Idle&, const Idle&) = default;
};

using MotionCommand = std::variant<Approach, Reformulate, Manipulate, RequestHuman, Idle>;

inline const char* command_kind(const MotionCommand& c) {
  return std::visit(
      [](const auto& v) -> const char* {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Approach>) return "approach";
        else if constexpr (std::is_same_v<T, Reformulate>) return "reformulate";
        else if constexpr (std::is_same_v<T, Manipulate>) return "manipulate";
        else if constexpr (std::is_same_v<T, RequestHuman>) return "request_human";
        else return "idle";
      },
      c);
}

/// The region a command steers toward, if any.
inline std::optional<Region> command_region(const MotionCommand& c) {
  if (const auto* a = std::get_if<Approach>(&c)) return a->region;
  if (const auto* r = std::get_if<Reformulate>(&c)) return r->key_region;
  return std::nullopt;
}

enum class Stream { MSI, ADM };
enum class ExplorationKind { None, Visible, Invisible };
enum class EpisodeStatus { Running, Completed, Failed };
enum class FailureReason { None, PlanningError, ReformulationLoop, Timeout, HumanAbort };

inline const char* to_string(Stream s) { return s == Stream::MSI ? "MSI" : "ADM"; }

inline const char* to_string(ExplorationKind k) {
  switch (k) {
    case ExplorationKind::Visible: return "visible";
    case ExplorationKind::Invisible: return "invisible";
    default: return "none";
  }
}

inline const char* to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Completed: return "completed";
    case EpisodeStatus::Failed: return "failed";
    default: return "running";
  }
}

inline const char* to_string(FailureReason r) {
  switch (r) {
    case FailureReason::PlanningError: return "planning_error";
    case FailureReason::ReformulationLoop: return "reformulation_loop";
    case FailureReason::Timeout: return "timeout";
    case FailureReason::HumanAbort: return "human_abort";
    default: return "none";
  }
}

/// Simulator-side facts about the tick, attached after the command is
/// chosen. The planner never reads these.
struct GroundTruth {
  Vec2 robot;
  std::optional<Region> target;     // box the robot should be heading for
  std::optional<Region> tool;       // required object, when in view
  std::optional<Region> operational;
  std::optional<Region> functional;
  std::optional<Region> container;  // its container, when it has one and is in view
  bool removed = false;             // required object has been taken away
};

struct TraceEvent {
  int step = 0;
  Stream stream = Stream::ADM;
  MotionCommand command = Idle{};
  std::string instruction;  // the instruction acted on (top of the subgoal stack)
  std::optional<Region> tool_region;
  ExplorationKind exploration = ExplorationKind::None;
  std::optional<Region> exploration_region;
  std::optional<std::string> exploration_label;
  double validity = 0.0;
  bool valid = false;
  double s_max = 0.0;
  double t_new = 0.0;
  double latency_ms = 0.0;
  int subgoal_depth = 0;
  EpisodeStatus status = EpisodeStatus::Running;
  FailureReason failure = FailureReason::None;
  std::string note;
  GroundTruth truth;
};

struct EpisodeTrace {
  std::string world_id;
  std::string instruction;
  std::vector<TraceEvent> events;
  EpisodeStatus status = EpisodeStatus::Running;
  FailureReason failure = FailureReason::None;
  bool physical_success = false;
  double wall_seconds = 0.0;
};

inline nlohmann::json event_to_json(const TraceEvent& e) {
  nlohmann::json j{{"step", e.step},
                   {"stream", to_string(e.stream)},
                   {"command", command_kind(e.command)},
                   {"instruction", e.instruction},
                   {"exploration", to_string(e.exploration)},
                   {"validity", e.validity},
                   {"s_max", e.s_max},
                   {"t_new", e.t_new},
                   {"latency_ms", e.latency_ms},
                   {"subgoal_depth", e.subgoal_depth},
                   {"status", to_string(e.status)}};
  std::visit(
      [&j](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Approach>) {
          j["region"] = region_to_json(v.region);
        } else if constexpr (std::is_same_v<T, Reformulate>) {
          j["subgoal"] = v.subgoal;
          j["region"] = region_to_json(v.key_region);
        } else if constexpr (std::is_same_v<T, Manipulate>) {
          j["operational"] = region_to_json(v.operational);
          j["functional"] = region_to_json(v.functional);
        } else if constexpr (std::is_same_v<T, RequestHuman>) {
          j["prompt"] = v.prompt;
        }
      },
      e.command);
  if (e.tool_region) j["tool_region"] = region_to_json(*e.tool_region);
  if (e.exploration_region) j["exploration_region"] = region_to_json(*e.exploration_region);
  if (e.exploration_label) j["exploration_label"] = *e.exploration_label;
  if (e.failure != FailureReason::None) j["failure"] = to_string(e.failure);
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

/// One JSON object per tick, newline separated.
inline void write_event_log(std::ostream& out, const EpisodeTrace& trace) {
  for (const auto& e : trace.events) {
    auto j = event_to_json(e);
    j["world"] = trace.world_id;
    out << j.dump() << '\n';
  }
}

}  // namespace aide
