#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aide/catalog.hpp"
#include "aide/config.hpp"
#include "aide/motion.hpp"
#include "aide/perception.hpp"

namespace aide {

enum class Visibility { Visible, Blurred, Occluded, Absent };

inline const char* to_string(Visibility v) {
  switch (v) {
    case Visibility::Blurred: return "blurred";
    case Visibility::Occluded: return "occluded";
    case Visibility::Absent: return "absent";
    default: return "visible";
  }
}

inline Visibility visibility_from_string(const std::string& s) {
  if (s == "visible") return Visibility::Visible;
  if (s == "blurred") return Visibility::Blurred;
  if (s == "occluded") return Visibility::Occluded;
  if (s == "absent") return Visibility::Absent;
  throw FormatError("unknown visibility '" + s + "'");
}

struct PartBoxes {
  WorldRect handle;
  WorldRect body;
  friend bool operator==(const PartBoxes&, const PartBoxes&) = default;
};

struct WorldObject {
  std::string id;
  std::string label;
  WorldRect box;
  std::string affordance_class;
  Visibility visibility = Visibility::Visible;
  std::optional<std::string> container_id;
  std::optional<PartBoxes> parts;
  bool opened = false;  // containers only

  friend bool operator==(const WorldObject&, const WorldObject&) = default;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Scripted change applied when the world clock reaches `tick`.
struct Injection {
  int tick = 0;
  std::string object_id;
  Visibility visibility = Visibility::Absent;
  friend bool operator==(const Injection&, const Injection&) = default;
};

struct World {
  std::string id;
  std::string category;  // clear | ambiguous | unrecognizable | absent | removal | reasoner_miss
  std::vector<WorldObject> objects;
  Pose robot;
  std::int32_t frame_width = 1600;
  std::int32_t frame_height = 1200;
  double pixels_per_unit = 100.0;
  ScenarioTables tables;
  std::map<std::string, std::string> gt;  // instruction -> required object id
  std::vector<Injection> injections;

  // Episode state.
  int tick = 0;
  std::string active_task;
  bool manipulated = false;
  bool physical_success = false;

  Camera camera() const { return Camera{pixels_per_unit, frame_width, frame_height}; }

  const WorldObject* find(const std::string& object_id) const {
    for (const auto& o : objects)
      if (o.id == object_id) return &o;
    return nullptr;
  }
  WorldObject* find(const std::string& object_id) {
    for (auto& o : objects)
      if (o.id == object_id) return &o;
    return nullptr;
  }

  std::vector<std::string> instructions() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : gt) out.push_back(k);
    return out;
  }

  /// Throws FormatError on the first broken invariant.
  void validate() const {
    std::set<std::string> ids;
    for (const auto& o : objects) {
      if (o.id.empty()) throw FormatError("world " + id + ": object without id");
      if (!ids.insert(o.id).second) throw FormatError("world " + id + ": duplicate object id " + o.id);
      if (o.box.x1 < o.box.x0 || o.box.y1 < o.box.y0) {
        throw FormatError("world " + id + ": inverted box on " + o.id);
      }
      if (o.visibility == Visibility::Occluded && !o.container_id) {
        throw FormatError("world " + id + ": occluded object " + o.id + " has no container");
      }
      if (o.parts && !(o.box.contains(o.parts->handle) && o.box.contains(o.parts->body))) {
        throw FormatError("world " + id + ": parts of " + o.id + " leave its box");
      }
    }
    for (const auto& o : objects) {
      if (o.container_id && !ids.count(*o.container_id)) {
        throw FormatError("world " + id + ": " + o.id + " refers to missing container " + *o.container_id);
      }
    }
    for (const auto& [instruction, object_id] : gt) {
      if (!ids.count(object_id)) {
        throw FormatError("world " + id + ": ground truth for '" + instruction + "' names missing " + object_id);
      }
    }
    for (const auto& inj : injections) {
      if (!ids.count(inj.object_id)) throw FormatError("world " + id + ": injection names missing object");
    }
    if (frame_width <= 0 || frame_height <= 0 || pixels_per_unit <= 0) {
      throw FormatError("world " + id + ": bad frame geometry");
    }
  }
};

struct SimOptions {
  int frame_period_ms = 100;
  double step_length = 0.5;
  double near_radius = 1.0;
  double unblur_distance = 3.0;  // blurred objects read as visible this close

  static SimOptions from(const ConfigParams& p) {
    SimOptions o;
    o.frame_period_ms = p.frame_period_ms;
    o.step_length = p.step_length();
    o.near_radius = p.near_radius;
    return o;
  }
};

namespace sim {

inline bool hidden(const World& w, const WorldObject& o) {
  if (o.visibility == Visibility::Absent) return true;
  if (o.visibility != Visibility::Occluded) return false;
  const auto* c = w.find(*o.container_id);
  return !(c && c->opened);
}

/// Projected operational/functional boxes; halves of the object box when
/// it has no scripted parts.
inline std::optional<RegionPair> project_parts(const World& w, const WorldObject& o, const Vec2& robot) {
  const auto cam = w.camera();
  const auto box = cam.project(o.box, robot);
  if (!box) return std::nullopt;
  if (o.parts) {
    const auto h = cam.project(o.parts->handle, robot);
    const auto b = cam.project(o.parts->body, robot);
    if (h && b) {
      const auto hc = intersection(*h, *box);
      const auto bc = intersection(*b, *box);
      if (hc && bc) return RegionPair{*hc, *bc};
    }
  }
  return split_regions(*box);
}

}  // namespace sim

/// Renders the current view: a frame whose raster lists every object the
/// camera can see, with its pixel box, distance and blur state.
inline SceneFrame observe(const World& world, const SimOptions& opts = {}) {
  const auto cam = world.camera();
  const Vec2 robot = world.robot.position();
  auto raster = std::make_shared<SyntheticRaster>();
  for (const auto& o : world.objects) {
    if (sim::hidden(world, o)) continue;
    const auto box = cam.project(o.box, robot);
    if (!box) continue;
    const double dist = euclidean(o.box.center(), robot);
    const bool blurred = o.visibility == Visibility::Blurred && dist > opts.unblur_distance;
    RasterEntry e{o.id, o.label, o.affordance_class, "", *box, dist, blurred};
    raster->entries.push_back(e);
    if (o.parts) {
      const auto parts = sim::project_parts(world, o, robot);
      if (parts) {
        raster->entries.push_back(RasterEntry{o.id, "handle", o.affordance_class, "handle",
                                              parts->operational, dist, blurred});
        raster->entries.push_back(RasterEntry{o.id, "body", o.affordance_class, "body",
                                              parts->functional, dist, blurred});
      }
    }
  }
  SceneFrame f;
  f.image = MediaRef::image("sim:" + world.id + "@" + std::to_string(world.tick));
  f.width = world.frame_width;
  f.height = world.frame_height;
  f.timestamp_ms = static_cast<std::int64_t>(world.tick) * opts.frame_period_ms;
  f.raster = std::move(raster);
  return f;
}

/// Ground truth for the current tick, recorded alongside the planner's
/// decision so scoring can be done after the fact.
inline GroundTruth annotate(const World& world) {
  GroundTruth t;
  t.robot = world.robot.position();
  const auto it = world.gt.find(world.active_task);
  if (it == world.gt.end()) return t;
  const auto* obj = world.find(it->second);
  if (!obj) return t;
  const auto cam = world.camera();
  t.removed = obj->visibility == Visibility::Absent;
  if (obj->container_id) {
    if (const auto* c = world.find(*obj->container_id)) t.container = cam.project(c->box, t.robot);
  }
  if (!t.removed) {
    t.tool = cam.project(obj->box, t.robot);
    if (const auto parts = sim::project_parts(world, *obj, t.robot)) {
      t.operational = parts->operational;
      t.functional = parts->functional;
    }
  }
  if (sim::hidden(world, *obj)) {
    t.target = t.removed ? std::nullopt : t.container;
  } else {
    t.target = t.tool;
  }
  return t;
}

/// Applies a command and advances the clock by one frame. Returns a warning
/// when the command could not be carried out (the world is left unchanged).
inline std::string apply(World& world, const MotionCommand& command, const SimOptions& opts = {}) {
  std::string warning;
  const auto cam = world.camera();
  const Vec2 robot = world.robot.position();

  if (const auto* a = std::get_if<Approach>(&command)) {
    if (!a->region.valid() || !a->region.within_frame(world.frame_width, world.frame_height)) {
      warning = "approach region outside the frame";
    } else {
      const Vec2 anchor = cam.unproject(a->region.center_x(), a->region.center_y(), robot);
      const double dx = anchor.x - robot.x, dy = anchor.y - robot.y;
      const double dist = std::hypot(dx, dy);
      if (dist > 0.0) {
        const double step = std::min(opts.step_length, dist);
        world.robot.x += dx / dist * step;
        world.robot.y += dy / dist * step;
        world.robot.heading = std::atan2(dy, dx);
      }
    }
  } else if (const auto* r = std::get_if<Reformulate>(&command)) {
    const std::string prefix = "open the ";
    if (!r->subgoal.starts_with(prefix)) {
      warning = "unsupported subgoal '" + r->subgoal + "'";
    } else {
      const std::string label = r->subgoal.substr(prefix.size());
      WorldObject* target = nullptr;
      for (auto& o : world.objects) {
        if (o.label != label || sim::hidden(world, o)) continue;
        const auto box = cam.project(o.box, robot);
        if (!box || !box->intersects(r->key_region)) continue;
        target = &o;
        break;
      }
      // Pixel rounding can put a region centre a hair past the planner's radius.
      const double slack = 2.0 / world.pixels_per_unit;
      if (!target) {
        warning = "no " + label + " at the key region";
      } else if (euclidean(target->box.center(), robot) > opts.near_radius + slack) {
        warning = label + " is out of reach";
      } else {
        target->opened = true;
      }
    }
  } else if (const auto* m = std::get_if<Manipulate>(&command)) {
    world.manipulated = true;
    world.physical_success = false;
    const auto it = world.gt.find(world.active_task);
    const auto* obj = it == world.gt.end() ? nullptr : world.find(it->second);
    if (obj && !sim::hidden(world, *obj)) {
      if (const auto parts = sim::project_parts(world, *obj, robot)) {
        world.physical_success = iou(m->operational, parts->operational) >= 0.5 &&
                                 iou(m->functional, parts->functional) >= 0.5;
      }
    }
  }

  ++world.tick;
  for (const auto& inj : world.injections) {
    if (inj.tick == world.tick) {
      if (auto* o = world.find(inj.object_id)) o->visibility = inj.visibility;
    }
  }
  return warning;
}

struct SuccessFlags {
  bool tool = false;
  bool operational = false;
  bool functional = false;
  bool whole = false;
  bool exploration_applies = false;  // required object starts hidden in a container
  bool exploration = false;          // an invisible-exploration region covered that container
};

inline bool starts_hidden(const World& world, const std::string& instruction) {
  const auto it = world.gt.find(instruction);
  if (it == world.gt.end()) return false;
  const auto* obj = world.find(it->second);
  return obj && obj->container_id &&
         (obj->visibility == Visibility::Occluded || obj->visibility == Visibility::Absent);
}

/// Scores a finished episode against the ground truth recorded in its trace.
inline SuccessFlags check_success(const EpisodeTrace& trace, const World& initial) {
  SuccessFlags f;
  f.exploration_applies = starts_hidden(initial, trace.instruction);
  for (const auto& e : trace.events) {
    if (e.exploration == ExplorationKind::Invisible && e.exploration_region && e.truth.container &&
        e.exploration_region->contains(*e.truth.container)) {
      f.exploration = true;
    }
  }
  const TraceEvent* last = nullptr;
  for (const auto& e : trace.events)
    if (std::holds_alternative<Manipulate>(e.command)) last = &e;
  if (!last) return f;
  const auto& m = std::get<Manipulate>(last->command);
  const auto& t = last->truth;
  f.tool = last->tool_region && t.tool && iou(*last->tool_region, *t.tool) >= 0.5;
  f.operational = t.operational && iou(m.operational, *t.operational) >= 0.5;
  f.functional = t.functional && iou(m.functional, *t.functional) >= 0.5;
  f.whole = f.tool && f.operational && f.functional;
  return f;
}

/// Per-frame execution correctness over valid frames (every tick before the
/// Manipulate, or every tick when there is none). A frame is correct when its
/// command steers at the current target.
struct FrameTally {
  int valid = 0;
  int correct = 0;
};

inline FrameTally frame_correctness(const EpisodeTrace& trace) {
  FrameTally t;
  for (const auto& e : trace.events) {
    if (std::holds_alternative<Manipulate>(e.command)) break;
    ++t.valid;
    const auto region = command_region(e.command);
    const auto& target = e.truth.target;
    if (!region || !target) continue;
    if (region->contains_point(target->center_x(), target->center_y()) || iou(*region, *target) >= 0.5) {
      ++t.correct;
    }
  }
  return t;
}

// Scenario documents ("aide-world/1").

inline constexpr const char* kWorldSchema = "aide-world/1";

namespace sim {

inline nlohmann::json rect_to_json(const WorldRect& r) { return nlohmann::json::array({r.x0, r.y0, r.x1, r.y1}); }

inline WorldRect rect_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("world box must be an array of 4 numbers");
  return WorldRect{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace sim

inline nlohmann::json world_to_json(const World& w) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : w.objects) {
    nlohmann::json j{{"id", o.id},
                     {"label", o.label},
                     {"class", o.affordance_class},
                     {"box", sim::rect_to_json(o.box)},
                     {"visibility", to_string(o.visibility)}};
    if (o.container_id) j["container"] = *o.container_id;
    if (o.parts) j["parts"] = {{"handle", sim::rect_to_json(o.parts->handle)}, {"body", sim::rect_to_json(o.parts->body)}};
    if (o.opened) j["opened"] = true;
    objects.push_back(std::move(j));
  }
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& [instruction, target] : w.gt) {
    nlohmann::json t{{"instruction", instruction}, {"target", target}};
    if (auto it = w.tables.tool.find(instruction); it != w.tables.tool.end()) t["tool"] = it->second;
    if (auto it = w.tables.container.find(instruction); it != w.tables.container.end()) t["container"] = it->second;
    if (auto it = w.tables.human.find(instruction); it != w.tables.human.end()) t["human"] = it->second;
    tasks.push_back(std::move(t));
  }
  nlohmann::json injections = nlohmann::json::array();
  for (const auto& i : w.injections) {
    injections.push_back({{"tick", i.tick}, {"object", i.object_id}, {"visibility", to_string(i.visibility)}});
  }
  return nlohmann::json{{"schema", kWorldSchema},
                        {"id", w.id},
                        {"category", w.category},
                        {"robot", {{"x", w.robot.x}, {"y", w.robot.y}, {"heading", w.robot.heading}}},
                        {"frame", {{"width", w.frame_width}, {"height", w.frame_height}, {"pixels_per_unit", w.pixels_per_unit}}},
                        {"objects", objects},
                        {"tasks", tasks},
                        {"injections", injections}};
}

inline World world_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("world: expected an object");
  const auto schema = doc.value("schema", std::string{});
  if (schema != kWorldSchema) {
    throw VersionError("world: expected schema '" + std::string(kWorldSchema) + "', got '" + schema + "'");
  }
  World w;
  try {
    w.id = doc.at("id").get<std::string>();
    w.category = doc.value("category", std::string{});
    if (doc.contains("robot")) {
      const auto& r = doc.at("robot");
      w.robot = Pose{r.value("x", 0.0), r.value("y", 0.0), r.value("heading", 0.0)};
    }
    if (doc.contains("frame")) {
      const auto& f = doc.at("frame");
      w.frame_width = f.value("width", 1600);
      w.frame_height = f.value("height", 1200);
      w.pixels_per_unit = f.value("pixels_per_unit", 100.0);
    }
    for (const auto& j : doc.at("objects")) {
      WorldObject o;
      o.id = j.at("id").get<std::string>();
      o.label = j.at("label").get<std::string>();
      o.affordance_class = j.value("class", catalog::class_of_label(o.label).value_or(""));
      o.box = sim::rect_from_json(j.at("box"));
      o.visibility = visibility_from_string(j.value("visibility", std::string("visible")));
      if (j.contains("container")) o.container_id = j.at("container").get<std::string>();
      if (j.contains("parts")) {
        o.parts = PartBoxes{sim::rect_from_json(j.at("parts").at("handle")),
                            sim::rect_from_json(j.at("parts").at("body"))};
      }
      o.opened = j.value("opened", false);
      w.objects.push_back(std::move(o));
    }
    for (const auto& t : doc.value("tasks", nlohmann::json::array())) {
      const auto instruction = t.at("instruction").get<std::string>();
      w.gt[instruction] = t.at("target").get<std::string>();
      if (t.contains("tool")) w.tables.tool[instruction] = t.at("tool").get<std::string>();
      if (t.contains("container")) w.tables.container[instruction] = t.at("container").get<std::string>();
      if (t.contains("human")) w.tables.human[instruction] = t.at("human").get<std::string>();
    }
    for (const auto& i : doc.value("injections", nlohmann::json::array())) {
      w.injections.push_back(Injection{i.at("tick").get<int>(), i.at("object").get<std::string>(),
                                       visibility_from_string(i.value("visibility", std::string("absent")))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("world: " + std::string(e.what()));
  }
  w.validate();
  return w;
}

inline void save_world(const World& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write world file: " + path);
  out << world_to_json(w).dump(2) << '\n';
}

inline World load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open world file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("world parse error in " + path + ": " + e.what());
  }
  return world_from_json(doc);
}

/// Every *.json world in a directory, ordered by file name.
inline std::vector<World> load_scenarios(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw FormatError("scenario directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<World> out;
  for (const auto& f : files) out.push_back(load_world(f.string()));
  return out;
}

}  // namespace aide
