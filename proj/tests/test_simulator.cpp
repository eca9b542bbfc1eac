#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "aide/mock_perception.hpp"
#include "aide/scenarios.hpp"
#include "aide/simulator.hpp"

using namespace aide;

namespace {

World coke_world() {
  auto w = scenario::base("coke", "absent");
  const auto fridge = scenario::container("fridge", "fridge", 0.5, 0.0);
  w.objects.push_back(fridge);
  w.objects.push_back(scenario::inside(scenario::tool("coke", "coke", 0, 0), fridge));
  scenario::bind(w, "I want something cold", "coke", "coke", "fridge");
  w.active_task = "I want something cold";
  return w;
}

bool sees(const SceneFrame& f, const std::string& id) {
  for (const auto& e : f.raster->entries)
    if (e.object_id == id) return true;
  return false;
}

}  // namespace

TEST(Observe, OccludedObjectHiddenUntilContainerOpens) {
  auto w = coke_world();
  EXPECT_FALSE(sees(observe(w), "coke"));
  EXPECT_TRUE(sees(observe(w), "fridge"));

  MockPerception p({}, {});
  const std::vector<std::string> vocab{"coke"};
  for (const auto& d : p.detect(observe(w), vocab, 5)) EXPECT_LT(d.confidence, 0.2);

  apply(w, Reformulate{"open the fridge", *w.camera().project(w.find("fridge")->box, {0, 0})});
  ASSERT_TRUE(w.find("fridge")->opened);
  EXPECT_TRUE(sees(observe(w), "coke"));
  const auto dets = p.detect(observe(w), vocab, 5);
  ASSERT_FALSE(dets.empty());
  EXPECT_EQ(dets.front().label, "coke");
}

TEST(Observe, DistanceTenDecaysConfidenceByEMinusTwo) {
  auto w = scenario::base("far", "clear");
  w.frame_width = 2400;
  w.frame_height = 2400;
  w.objects.push_back(scenario::tool("cup", "cup", 6.0, 8.0));
  MockPerception p({}, {});
  const std::vector<std::string> vocab{"cup"};
  const auto dets = p.detect(observe(w), vocab, 1);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_NEAR(dets[0].confidence, std::exp(-2.0), 1e-9);
}

TEST(Observe, BlurLiftsUpClose) {
  auto w = scenario::base("blur", "clear");
  w.objects.push_back(scenario::tool("far", "cup", 4.0, 0.0, Visibility::Blurred));
  w.objects.push_back(scenario::tool("near", "mug", 2.0, 0.0, Visibility::Blurred));
  const auto f = observe(w);
  for (const auto& e : f.raster->entries) EXPECT_EQ(e.blurred, e.object_id == "far") << e.object_id;
}

TEST(Observe, RobotAtFrameCentreAndDeterministic) {
  auto w = scenario::base("c", "clear");
  w.objects.push_back(scenario::tool("t", "cup", 0.0, 0.0, Visibility::Visible, false));
  const auto f = observe(w);
  ASSERT_EQ(f.raster->entries.size(), 1u);
  const auto& b = f.raster->entries[0].box;
  EXPECT_EQ(b, (Region{780, 560, 820, 640}));
  EXPECT_EQ(observe(w).image, f.image);
  EXPECT_EQ(observe(w).raster->entries, f.raster->entries);
}

TEST(Apply, ApproachMovesHalfAUnit) {
  auto w = scenario::base("a", "clear");
  w.objects.push_back(scenario::tool("t", "cup", 5.0, 0.0));
  const auto box = *w.camera().project(w.find("t")->box, w.robot.position());
  EXPECT_TRUE(apply(w, Approach{box}).empty());
  EXPECT_NEAR(euclidean(w.robot.position(), {5.0, 0.0}), 4.5, 0.01);
  EXPECT_EQ(w.tick, 1);
}

TEST(Apply, ApproachNeverOvershoots) {
  auto w = scenario::base("a", "clear");
  w.objects.push_back(scenario::tool("t", "cup", 0.3, 0.0));
  apply(w, Approach{*w.camera().project(w.find("t")->box, w.robot.position())});
  EXPECT_NEAR(w.robot.x, 0.3, 0.01);
}

TEST(Apply, OpenWhenFarIsNoOp) {
  auto w = coke_world();
  w.find("fridge")->box = WorldRect{3.4, -0.6, 4.6, 0.6};
  const auto key = *w.camera().project(w.find("fridge")->box, w.robot.position());
  const auto warning = apply(w, Reformulate{"open the fridge", key});
  EXPECT_FALSE(warning.empty());
  EXPECT_FALSE(w.find("fridge")->opened);
}

TEST(Apply, MalformedCommandsWarn) {
  auto w = coke_world();
  EXPECT_FALSE(apply(w, Approach{Region{-50, -50, 10, 10}}).empty());
  EXPECT_FALSE(apply(w, Reformulate{"fly to the moon", Region{0, 0, 10, 10}}).empty());
  EXPECT_EQ(w.robot, Pose{});
  EXPECT_EQ(w.tick, 2);
}

TEST(Apply, ManipulateWithGroundTruthPartsSucceeds) {
  auto w = scenario::base("m", "clear");
  w.objects.push_back(scenario::tool("t", "cup", 0.5, 0.0));
  scenario::bind(w, "I am thirsty", "t", "cup");
  w.active_task = "I am thirsty";
  const auto parts = *sim::project_parts(w, *w.find("t"), w.robot.position());
  apply(w, Manipulate{parts.operational, parts.functional});
  EXPECT_TRUE(w.manipulated);
  EXPECT_TRUE(w.physical_success);

  apply(w, Manipulate{parts.functional, parts.operational});
  EXPECT_FALSE(w.physical_success);
}

TEST(Apply, InjectionRemovesObjectOnItsTick) {
  auto w = scenario::base("r", "removal");
  w.objects.push_back(scenario::tool("t", "cup", 2.0, 0.0));
  w.injections.push_back({2, "t", Visibility::Absent});
  apply(w, Idle{});
  EXPECT_TRUE(sees(observe(w), "t"));
  apply(w, Idle{});
  EXPECT_FALSE(sees(observe(w), "t"));
}

namespace {

EpisodeTrace manipulate_trace(const World& w, const std::string& instruction, const Region& tool, const Region& op,
                              const Region& fn) {
  EpisodeTrace t;
  t.instruction = instruction;
  World copy = w;
  copy.active_task = instruction;
  TraceEvent e;
  e.command = Manipulate{op, fn};
  e.tool_region = tool;
  e.truth = annotate(copy);
  t.events.push_back(e);
  return t;
}

}  // namespace

TEST(CheckSuccess, PerfectEpisodeAllTrue) {
  auto w = scenario::base("m", "clear");
  w.objects.push_back(scenario::tool("t", "cup", 0.5, 0.0));
  scenario::bind(w, "I am thirsty", "t", "cup");
  const auto tool = *w.camera().project(w.find("t")->box, {0, 0});
  const auto parts = *sim::project_parts(w, *w.find("t"), {0, 0});
  const auto f = check_success(manipulate_trace(w, "I am thirsty", tool, parts.operational, parts.functional), w);
  EXPECT_TRUE(f.tool && f.operational && f.functional && f.whole);
  EXPECT_FALSE(f.exploration_applies);
}

TEST(CheckSuccess, WrongToolOfSameClassFails) {
  auto w = scenario::base("m", "ambiguous");
  w.objects.push_back(scenario::tool("t", "cup", 0.5, 0.0));
  w.objects.push_back(scenario::tool("s", "mug", -0.5, 0.0));
  scenario::bind(w, "I am thirsty", "t", "cup");
  const auto wrong = *w.camera().project(w.find("s")->box, {0, 0});
  const auto parts = *sim::project_parts(w, *w.find("s"), {0, 0});
  const auto f = check_success(manipulate_trace(w, "I am thirsty", wrong, parts.operational, parts.functional), w);
  EXPECT_FALSE(f.tool);
  EXPECT_FALSE(f.whole);
}

TEST(CheckSuccess, ContainerFoundForAbsentTool) {
  auto w = coke_world();
  EpisodeTrace t;
  t.instruction = "I want something cold";
  TraceEvent e;
  e.exploration = ExplorationKind::Invisible;
  e.exploration_region = *w.camera().project(w.find("fridge")->box, {0, 0});
  e.truth = annotate(w);
  t.events.push_back(e);
  const auto f = check_success(t, w);
  EXPECT_TRUE(f.exploration_applies);
  EXPECT_TRUE(f.exploration);
  EXPECT_FALSE(f.whole);
}

TEST(FrameCorrectness, CountsTicksBeforeManipulate) {
  auto w = scenario::base("m", "clear");
  w.objects.push_back(scenario::tool("t", "cup", 3.0, 0.0));
  scenario::bind(w, "I am thirsty", "t", "cup");
  w.active_task = "I am thirsty";
  const auto box = *w.camera().project(w.find("t")->box, {0, 0});
  EpisodeTrace t;
  TraceEvent good;
  good.command = Approach{box};
  good.truth = annotate(w);
  TraceEvent bad = good;
  bad.command = Approach{Region{0, 0, 10, 10}};
  TraceEvent idle = good;
  idle.command = Idle{};
  TraceEvent done = good;
  done.command = Manipulate{box, box};
  t.events = {good, bad, idle, done, good};
  const auto tally = frame_correctness(t);
  EXPECT_EQ(tally.valid, 3);
  EXPECT_EQ(tally.correct, 1);
}

TEST(Scenarios, CategoryCountsAndInvariants) {
  const auto worlds = scripted_scenarios();
  EXPECT_GE(worlds.size(), 24u);
  std::map<std::string, int> counts;
  std::set<std::string> ids;
  for (const auto& w : worlds) {
    EXPECT_NO_THROW(w.validate()) << w.id;
    EXPECT_TRUE(ids.insert(w.id).second) << w.id;
    ++counts[w.category];
    EXPECT_FALSE(w.instructions().empty()) << w.id;
  }
  for (const char* c : {"clear", "ambiguous", "unrecognizable", "absent"}) EXPECT_GE(counts[c], 6) << c;
  EXPECT_TRUE(ids.count("absent-coke"));
  EXPECT_TRUE(ids.count("absent-tape"));
}

TEST(Scenarios, FridgeAndDrawerWorldsHideTheirTools) {
  for (const auto& w : scripted_scenarios()) {
    if (w.id != "absent-coke" && w.id != "absent-tape") continue;
    const auto* target = w.find(w.gt.begin()->second);
    ASSERT_TRUE(target);
    ASSERT_TRUE(target->container_id);
    EXPECT_EQ(w.find(*target->container_id)->label, w.id == "absent-coke" ? "fridge" : "drawer");
    EXPECT_TRUE(starts_hidden(w, w.gt.begin()->first));
  }
}

TEST(Scenarios, HouseholdInstructionsBound) {
  const auto worlds = household_scenarios();
  ASSERT_EQ(worlds.size(), 6u);
  std::set<std::string> instructions;
  for (const auto& w : worlds)
    for (const auto& i : w.instructions()) instructions.insert(i);
  EXPECT_TRUE(instructions.count("I am thirsty"));
  EXPECT_EQ(instructions.size(), 6u);
}

TEST(WorldValidation, RejectsBrokenWorlds) {
  auto w = coke_world();
  auto dup = w;
  dup.objects.push_back(dup.objects.front());
  EXPECT_THROW(dup.validate(), FormatError);

  auto orphan = w;
  orphan.find("coke")->container_id.reset();
  EXPECT_THROW(orphan.validate(), FormatError);

  auto parts = w;
  parts.find("coke")->parts->handle = WorldRect{10, 10, 11, 11};
  EXPECT_THROW(parts.validate(), FormatError);

  auto gt = w;
  gt.gt["x"] = "ghost";
  EXPECT_THROW(gt.validate(), FormatError);
}

TEST(WorldFiles, RoundTripAndSchemaCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "aide_world_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto worlds = scripted_scenarios();
  for (const auto& w : worlds) save_world(w, (dir / (w.id + ".json")).string());
  const auto loaded = load_scenarios(dir.string());
  ASSERT_EQ(loaded.size(), worlds.size());
  for (const auto& l : loaded) {
    const auto it = std::find_if(worlds.begin(), worlds.end(), [&](const World& w) { return w.id == l.id; });
    ASSERT_NE(it, worlds.end());
    EXPECT_EQ(world_to_json(*it), world_to_json(l)) << l.id;
  }

  auto doc = world_to_json(worlds.front());
  doc["schema"] = "aide-world/9";
  EXPECT_THROW(world_from_json(doc), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(Determinism, ObserveApplySequenceRepeats) {
  auto run = [] {
    auto w = coke_world();
    std::vector<std::vector<RasterEntry>> seen;
    for (int i = 0; i < 5; ++i) {
      const auto f = observe(w);
      seen.push_back(f.raster->entries);
      apply(w, Approach{*w.camera().project(w.find("fridge")->box, w.robot.position())});
    }
    return seen;
  };
  EXPECT_EQ(run(), run());
}
