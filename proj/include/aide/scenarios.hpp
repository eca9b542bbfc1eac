#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aide/catalog.hpp"
#include "aide/simulator.hpp"

namespace aide {

namespace scenario {

/// Tool-sized object centred at (cx, cy); handle in the lower half when
/// `with_parts` is set.
inline WorldObject tool(std::string id, std::string label, double cx, double cy,
                        Visibility vis = Visibility::Visible, bool with_parts = true) {
  WorldObject o;
  o.id = std::move(id);
  o.label = std::move(label);
  o.affordance_class = catalog::class_of_label(o.label).value_or("");
  o.box = WorldRect{cx - 0.2, cy - 0.4, cx + 0.2, cy + 0.4};
  o.visibility = vis;
  if (with_parts) {
    o.parts = PartBoxes{WorldRect{cx - 0.08, cy - 0.05, cx + 0.08, cy + 0.4},
                        WorldRect{cx - 0.2, cy - 0.4, cx + 0.2, cy - 0.05}};
  }
  return o;
}

inline WorldObject container(std::string id, std::string label, double cx, double cy) {
  WorldObject o;
  o.id = std::move(id);
  o.label = std::move(label);
  o.affordance_class = o.label;
  o.box = WorldRect{cx - 0.6, cy - 0.6, cx + 0.6, cy + 0.6};
  return o;
}

inline WorldObject inside(WorldObject item, const WorldObject& box) {
  const auto c = box.box.center();
  item = tool(item.id, item.label, c.x, c.y, Visibility::Occluded, item.parts.has_value());
  item.container_id = box.id;
  return item;
}

/// First tool of every class other than `cls`, in catalog order.
inline std::vector<std::string> other_tools(const std::string& cls, std::size_t skip = 0) {
  std::vector<std::string> out;
  for (const auto& c : catalog::tool_classes()) {
    if (c.name == cls) continue;
    out.emplace_back(c.tools[skip % c.tools.size()]);
  }
  return out;
}

inline World base(std::string id, std::string category) {
  World w;
  w.id = std::move(id);
  w.category = std::move(category);
  return w;
}

inline void bind(World& w, const std::string& instruction, const std::string& target_id,
                 const std::string& tool_label, const std::string& container_label = "") {
  w.gt[instruction] = target_id;
  w.tables.tool[instruction] = tool_label;
  w.tables.human[instruction] = tool_label;
  if (!container_label.empty()) w.tables.container[instruction] = container_label;
}

struct Spec {
  const char* id;
  const char* instruction;
  const char* label;
  double x;
  double y;
  bool parts;
};

/// Clear: the tool is in plain view 2-3 units away among tools of other classes.
inline World clear(const Spec& s, int variant) {
  auto w = base(s.id, "clear");
  w.objects.push_back(tool("target", s.label, s.x, s.y, Visibility::Visible, s.parts));
  const auto cls = w.objects.back().affordance_class;
  const auto others = other_tools(cls, static_cast<std::size_t>(variant));
  const double spots[][2] = {{-2.5, 1.5}, {-1.0, -3.0}, {3.5, 3.5}, {-3.5, -2.0}, {1.0, 4.0}};
  for (std::size_t i = 0; i < 4; ++i) {
    w.objects.push_back(tool("d" + std::to_string(i), others[(i + variant) % others.size()],
                             spots[(i + variant) % 5][0], spots[(i + variant) % 5][1]));
  }
  bind(w, s.instruction, "target", s.label);
  return w;
}

/// Ambiguous: a sibling of the same class is also in view, blurred and off
/// to the side, plus unrelated clutter.
inline World ambiguous(const Spec& s, const char* sibling, int variant) {
  auto w = base(s.id, "ambiguous");
  w.objects.push_back(tool("target", s.label, s.x, s.y, Visibility::Visible, s.parts));
  const auto cls = w.objects.back().affordance_class;
  const double sx = s.x > 0 ? -4.5 : 4.5;
  w.objects.push_back(tool("sibling", sibling, sx, 3.0, Visibility::Blurred));
  const auto others = other_tools(cls, static_cast<std::size_t>(variant));
  w.objects.push_back(tool("d0", others[0], 0.5, -3.0));
  w.objects.push_back(tool("d1", others[3], -0.5, 3.5));
  w.objects.push_back(tool("d2", others[5], sx * 0.6, -2.5));
  bind(w, s.instruction, "target", s.label);
  return w;
}

/// Unrecognizable: the tool is blurred and far, five unrelated objects crowd
/// the robot and four more surround the tool, so the tool only shows up past
/// the top-N detections.
inline World unrecognizable(const Spec& s, int variant) {
  auto w = base(s.id, "unrecognizable");
  w.objects.push_back(tool("target", s.label, s.x, s.y, Visibility::Blurred, s.parts));
  const auto cls = w.objects.back().affordance_class;
  const auto others = other_tools(cls, static_cast<std::size_t>(variant));
  const double near[][2] = {{-1.0, 0.0}, {0.0, -1.0}, {0.0, 1.0}, {-0.7, 0.7}, {-0.7, -0.7}};
  const double side = s.x > 0 ? 1.0 : -1.0;
  for (int i = 0; i < 5; ++i) {
    w.objects.push_back(tool("n" + std::to_string(i), others[i % others.size()], side * near[i][0], near[i][1]));
  }
  const double ring[][2] = {{-0.8, -0.8}, {-0.8, 0.8}, {0.7, -0.8}, {0.7, 0.8}};
  for (int i = 0; i < 4; ++i) {
    w.objects.push_back(tool("b" + std::to_string(i), others[(i + 2) % others.size()],
                             s.x + side * ring[i][0], s.y + ring[i][1]));
  }
  bind(w, s.instruction, "target", s.label);
  return w;
}

/// Absent: the tool is shut inside a container 3-5 units away; another
/// container and some clutter are also in view.
inline World absent(const Spec& s, const char* box_label, const char* decoy_label, int variant) {
  auto w = base(s.id, "absent");
  const auto box = container("box", box_label, s.x, s.y);
  w.objects.push_back(box);
  w.objects.push_back(inside(tool("target", s.label, 0, 0, Visibility::Occluded, s.parts), box));
  w.objects.push_back(container("decoy", decoy_label, -s.x * 0.9, -s.y - 1.5));
  const auto cls = w.objects.back().affordance_class;
  const auto others = other_tools(catalog::class_of_label(s.label).value_or(cls), static_cast<std::size_t>(variant));
  w.objects.push_back(tool("d0", others[1], 1.0, -1.2));
  w.objects.push_back(tool("d1", others[4], -1.2, 1.0));
  bind(w, s.instruction, "target", s.label, box_label);
  return w;
}

}  // namespace scenario

/// The scripted evaluation library: seven worlds in each of the four
/// categories, including the six household tasks (cup, brush, hammer,
/// Coke in the fridge, tape in the drawer, pillow).
inline std::vector<World> scripted_scenarios() {
  using scenario::Spec;
  std::vector<World> out;
  const Spec clear[] = {
      {"clear-cup", "I am thirsty", "cup", 2.5, 0.5, true},
      {"clear-brush", "I want to clean the dust", "brush", -2.0, 1.8, true},
      {"clear-hammer", "I want to crack walnuts", "hammer", 2.0, -1.5, true},
      {"clear-pillow", "I want to support my waist while sitting", "pillow", 1.5, 2.2, false},
      {"clear-pen", "I need to jot this down", "pen", -2.4, -1.0, false},
      {"clear-knife", "slice the bread", "knife", 2.8, 0.0, true},
      {"clear-kettle", "I want some hot tea", "kettle", -1.8, -2.0, true},
  };
  for (int i = 0; i < 7; ++i) out.push_back(scenario::clear(clear[i], i));

  const Spec amb[] = {
      {"ambiguous-glass", "my throat feels dry", "glass", 2.2, 0.0, true},
      {"ambiguous-broom", "the floor needs sweeping", "broom", -2.3, 0.5, true},
      {"ambiguous-hammer", "this nail is sticking out", "hammer", 2.0, 1.0, true},
      {"ambiguous-tape", "seal this package", "tape", -2.5, -0.5, false},
      {"ambiguous-pen", "sign this form", "pen", 2.4, -0.8, false},
      {"ambiguous-scissors", "trim these flowers", "scissors", -2.0, 1.2, true},
      {"ambiguous-mug", "I want a drink", "mug", 2.6, 1.4, true},
  };
  const char* siblings[] = {"mug", "brush", "mallet", "glue", "marker", "knife", "cup"};
  for (int i = 0; i < 7; ++i) out.push_back(scenario::ambiguous(amb[i], siblings[i], i));

  const Spec unrec[] = {
      {"unrecognizable-sponge", "I want to tidy up the desk", "sponge", 6.8, 0.5, true},
      {"unrecognizable-mallet", "I want to crush some ice", "mallet", -6.8, 1.0, true},
      {"unrecognizable-cushion", "make this chair softer", "cushion", 6.6, -1.8, false},
      {"unrecognizable-cutter", "cut this paper in half", "cutter", -6.5, -2.2, true},
      {"unrecognizable-lighter", "light the candles", "lighter", 6.7, 1.8, false},
      {"unrecognizable-marker", "mark the date on the calendar", "marker", -6.9, 2.0, true},
      {"unrecognizable-bottle", "I need to stay hydrated", "bottle", 6.9, -0.6, true},
  };
  for (int i = 0; i < 7; ++i) out.push_back(scenario::unrecognizable(unrec[i], i));

  struct AbsentSpec {
    Spec s;
    const char* box;
    const char* decoy;
  };
  const AbsentSpec abs[] = {
      {{"absent-coke", "I want something cold to drink", "coke", 4.0, 1.0, true}, "fridge", "cabinet"},
      {{"absent-tape", "I want to close up delivery boxes tightly", "tape", -3.5, 2.0, false}, "drawer", "closet"},
      {{"absent-knife", "I need to portion the cake", "knife", 3.2, -2.0, true}, "drawer", "fridge"},
      {{"absent-kettle", "boil some water", "kettle", -4.0, -1.5, true}, "cabinet", "toolbox"},
      {{"absent-pillow", "I want to rest my head", "pillow", 2.5, 3.0, false}, "closet", "drawer"},
      {{"absent-hammer", "flatten this dent", "hammer", -3.0, -3.0, true}, "toolbox", "cabinet"},
      {{"absent-pen", "write a shopping list", "pen", 4.2, -1.0, false}, "drawer", "closet"},
  };
  for (int i = 0; i < 7; ++i) out.push_back(scenario::absent(abs[i].s, abs[i].box, abs[i].decoy, i));
  return out;
}

/// The six household tasks in the order they are usually listed.
inline std::vector<World> household_scenarios() {
  const char* ids[] = {"clear-cup", "clear-brush", "clear-hammer", "absent-coke", "absent-tape", "clear-pillow"};
  std::vector<World> out;
  const auto all = scripted_scenarios();
  for (const char* id : ids) {
    for (const auto& w : all)
      if (w.id == id) out.push_back(w);
  }
  return out;
}

/// Worlds where the required tool is taken away at `removal_tick`. Only far,
/// unrelated clutter remains in view afterwards.
inline std::vector<World> removal_scenarios(int removal_tick = 2) {
  using scenario::tool;
  struct R {
    const char* id;
    const char* instruction;
    const char* label;
    double x, y;
  };
  const R specs[] = {
      {"removal-cup", "I am thirsty", "cup", 2.5, 0.3},
      {"removal-brush", "I want to clean the dust", "brush", 2.4, -0.6},
      {"removal-hammer", "I want to crack walnuts", "hammer", 2.6, 0.8},
      {"removal-tape", "seal this package", "tape", 2.5, -1.0},
      {"removal-knife", "slice the bread", "knife", 2.2, 1.2},
      {"removal-pen", "sign this form", "pen", 2.7, 0.0},
  };
  std::vector<World> out;
  int v = 0;
  for (const auto& s : specs) {
    auto w = scenario::base(s.id, "removal");
    w.objects.push_back(tool("target", s.label, s.x, s.y));
    const auto others = scenario::other_tools(w.objects.back().affordance_class, static_cast<std::size_t>(v++));
    w.objects.push_back(tool("far0", others[0], -7.4, -2.0));
    w.objects.push_back(tool("far1", others[2], -7.5, 1.5));
    w.injections.push_back(Injection{removal_tick, "target", Visibility::Absent});
    scenario::bind(w, s.instruction, "target", s.label);
    out.push_back(std::move(w));
  }
  return out;
}

/// Worlds whose instruction the reasoner cannot interpret; a human knows the
/// answer unless `with_hints` is false.
inline std::vector<World> reasoner_miss_scenarios(bool with_hints = true) {
  using scenario::tool;
  struct M {
    const char* id;
    const char* instruction;
    const char* label;
    double x, y;
  };
  const M specs[] = {
      {"miss-cup", "the plant on the sill looks sad", "cup", 2.4, 0.4},
      {"miss-brush", "grandma is visiting in an hour", "brush", -2.2, 1.0},
      {"miss-hammer", "the shelf wobbles when I lean on it", "hammer", 2.0, -1.4},
      {"miss-tape", "my parcel goes out tomorrow", "tape", -2.5, -0.8},
      {"miss-knife", "the baguette is still whole", "knife", 2.6, 1.5},
      {"miss-pen", "the delivery guy needs a signature", "pen", 1.8, 2.0},
  };
  std::vector<World> out;
  int v = 0;
  for (const auto& s : specs) {
    auto w = scenario::base(s.id, "reasoner_miss");
    w.objects.push_back(tool("target", s.label, s.x, s.y));
    const auto others = scenario::other_tools(w.objects.back().affordance_class, static_cast<std::size_t>(v++));
    w.objects.push_back(tool("d0", others[1], -1.5, -3.0));
    w.objects.push_back(tool("d1", others[3], 3.5, 3.5));
    w.gt[s.instruction] = "target";
    if (with_hints) w.tables.human[s.instruction] = s.label;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace aide
