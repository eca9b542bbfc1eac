#include <gtest/gtest.h>

#include <algorithm>

#include "aide/harness.hpp"
#include "aide/planner.hpp"
#include "aide/scenarios.hpp"
#include "test_support.hpp"

using namespace aide;

namespace {

const World& scripted(const std::string& id) {
  static const auto worlds = scripted_scenarios();
  for (const auto& w : worlds)
    if (w.id == id) return w;
  throw std::runtime_error("no world " + id);
}

const RelationshipSpace& corpus_space() {
  static const auto space = default_space(ConfigParams{}, 7, 432);
  return space;
}

MatchStats stats_of(double confidence, double sim) {
  MatchStats st;
  st.detections.push_back(Detection{"cup", Region{0, 0, 10, 10}, confidence, 1});
  st.similarity.push_back(SimilarityScore(sim).value());
  st.s_max = st.t_new = st.similarity.back();
  return st;
}

EpisodeTrace episode(const World& world, double sigma = 0.0, std::uint64_t seed = 1, int max_steps = 60) {
  World w = world;
  RelationshipSpace space = corpus_space();
  MockPerception p(w.tables, MockSettings::from_noise(sigma, seed, 19));
  return run_closed_loop(w.instructions().front(), w, space, ConfigParams{}, p, max_steps);
}

int count_kind(const EpisodeTrace& t, const char* kind) {
  return static_cast<int>(std::count_if(t.events.begin(), t.events.end(), [&](const TraceEvent& e) {
    return std::string(command_kind(e.command)) == kind;
  }));
}

}  // namespace

TEST(Validity, Examples) {
  ConfigParams p;
  const auto top = validity_check(stats_of(1.0, 1.0), p);
  EXPECT_TRUE(top.valid);
  EXPECT_NEAR(top.score, 2.0 - SimilarityScore::kEpsilon, 1e-12);

  const auto low = validity_check(stats_of(0.2, 0.25), p);
  EXPECT_FALSE(low.valid);
  EXPECT_NEAR(low.score, 0.45, 1e-12);

  EXPECT_TRUE(validity_check(stats_of(0.25, 0.25), p).valid);
  EXPECT_FALSE(validity_check(MatchStats{}, p).valid);
}

TEST(Validity, NeedsMsi) {
  EXPECT_TRUE(needs_msi(true, Validity{true, 1.5}));
  EXPECT_FALSE(needs_msi(false, Validity{true, 1.5}));
  EXPECT_TRUE(needs_msi(false, Validity{false, 0.3}));
}

TEST(DecideMotion, Rules) {
  ConfigParams params;
  GroundingResult g = aide::testing::simple_result("cup");
  {
    PlannerState s;
    const auto cmd = decide_motion(Decision{g, {}}, true, s, params);
    ASSERT_TRUE(std::holds_alternative<Manipulate>(cmd));
    EXPECT_EQ(std::get<Manipulate>(cmd).operational, g.operational_region);
    EXPECT_EQ(s.status, EpisodeStatus::Completed);
  }
  {
    PlannerState s;
    EXPECT_EQ(decide_motion(Decision{g, {}}, false, s, params), MotionCommand{Approach{g.tool_region}});
    EXPECT_EQ(s.status, EpisodeStatus::Running);
  }
  const Region r{10, 10, 50, 50};
  {
    PlannerState s;
    EXPECT_EQ(decide_motion(Decision{{}, {ExplorationKind::Visible, r, {}}}, true, s, params),
              MotionCommand{Approach{r}});
  }
  {
    PlannerState s;
    const Decision d{{}, {ExplorationKind::Invisible, r, "fridge"}};
    EXPECT_EQ(decide_motion(d, false, s, params), MotionCommand{Approach{r}});
    EXPECT_TRUE(s.subgoal_stack.empty());
    EXPECT_EQ(decide_motion(d, true, s, params), MotionCommand{(Reformulate{"open the fridge", r})});
    EXPECT_EQ(s.subgoal_stack, std::vector<std::string>{"open the fridge"});
    // Grounding pops the subgoal.
    decide_motion(Decision{g, {}}, false, s, params);
    EXPECT_TRUE(s.subgoal_stack.empty());
  }
  {
    PlannerState s;
    const Decision d{{}, {ExplorationKind::Invisible, r, "fridge"}};
    for (int i = 0; i < params.max_subgoal_depth; ++i)
      EXPECT_TRUE(std::holds_alternative<Reformulate>(decide_motion(d, true, s, params)));
    EXPECT_EQ(decide_motion(d, true, s, params), MotionCommand{Idle{}});
    EXPECT_EQ(s.status, EpisodeStatus::Failed);
    EXPECT_EQ(s.failure, FailureReason::ReformulationLoop);
  }
}

TEST(RunMsi, NovelTaskGroundsAndInserts) {
  const auto& w = scripted("clear-cup");
  RelationshipSpace space = corpus_space();
  const auto before = space.record_count();
  MockPerception p(w.tables, {});
  ConfigParams params;
  InstructionRecord stored;
  const auto out = run_msi(TaskInput{"I am thirsty", observe(w)}, space, nullptr, params, p, &stored);
  ASSERT_TRUE(out.grounding);
  EXPECT_EQ(out.grounding->tool_label, "cup");
  EXPECT_EQ(out.grounding->tool_region, *w.camera().project(w.find("target")->box, {0, 0}));
  EXPECT_EQ(space.record_count(), before + 1);
  ASSERT_TRUE(space.find(stored.id));
  const auto hit = space.dfs_retrieve(stored.instruction_affordance, 0.0);
  ASSERT_TRUE(hit.found());
  EXPECT_EQ(distance(hit.record->instruction_affordance, stored.instruction_affordance), 0.0);
}

TEST(RunMsi, SingleObjectSceneSelectsIt) {
  auto w = scenario::base("one", "clear");
  w.objects.push_back(scenario::tool("t", "hammer", 0.8, 0.0));
  w.tables.tool["drive this nail"] = "hammer";
  MockPerception p(w.tables, {});
  RelationshipSpace space = corpus_space();
  const auto out = mm_cot(TaskInput{"drive this nail", observe(w)}, nullptr, ConfigParams{}, p);
  ASSERT_TRUE(out.grounding);
  EXPECT_EQ(out.grounding->tool_region, *w.camera().project(w.find("t")->box, {0, 0}));
}

TEST(RunMsi, OccludedToolCarriesUnseenHint) {
  const auto& w = scripted("absent-coke");
  RelationshipSpace space = corpus_space();
  MockPerception p(w.tables, {});
  InstructionRecord stored;
  const auto instruction = w.instructions().front();
  const auto out = run_msi(TaskInput{instruction, observe(w)}, space, nullptr, ConfigParams{}, p, &stored);
  EXPECT_FALSE(out.grounding);
  EXPECT_EQ(out.exploration.kind, ExplorationKind::Invisible);
  ASSERT_EQ(stored.results.size(), 1u);
  ASSERT_TRUE(stored.results[0].unseen);
  EXPECT_EQ(stored.results[0].unseen->label, "fridge");
  EXPECT_FALSE(stored.results[0].unseen->image.is_text());
}

TEST(RunMsi, ReasonerMissThrows) {
  const World w = reasoner_miss_scenarios().front();
  RelationshipSpace space = corpus_space();
  MockPerception p(w.tables, {});
  EXPECT_THROW(run_msi(TaskInput{w.instructions().front(), observe(w)}, space, nullptr, ConfigParams{}, p),
               ReasonerError);
}

TEST(Step, ReasonerMissRequestsHumanThenRecovers) {
  const World w = reasoner_miss_scenarios().front();
  const auto instruction = w.instructions().front();
  RelationshipSpace space = corpus_space();
  MockPerception p(w.tables, {});
  Planner planner(space, ConfigParams{}, p);
  const auto frame = observe(w);
  const auto first = planner.step(TaskInput{instruction, frame});
  EXPECT_TRUE(std::holds_alternative<RequestHuman>(first.command));
  EXPECT_EQ(first.event.stream, Stream::MSI);
  EXPECT_TRUE(std::holds_alternative<RequestHuman>(planner.step(TaskInput{instruction, frame}).command));

  planner.provide_human_answer(w.tables.human.at(instruction));
  const auto next = planner.step(TaskInput{instruction, frame});
  EXPECT_EQ(next.event.stream, Stream::MSI);
  EXPECT_TRUE(std::holds_alternative<Approach>(next.command) || std::holds_alternative<Manipulate>(next.command));
}

TEST(Step, NoAnswerFailsTheEpisode) {
  PlannerState s;
  s.awaiting_human = true;
  provide_human_answer(s, std::nullopt, FailureReason::HumanAbort);
  EXPECT_EQ(s.status, EpisodeStatus::Failed);
  EXPECT_EQ(s.failure, FailureReason::HumanAbort);
}

TEST(Step, FinishedStatesAreSticky) {
  const auto& w = scripted("clear-cup");
  RelationshipSpace space = corpus_space();
  MockPerception p(w.tables, {});
  for (auto status : {EpisodeStatus::Completed, EpisodeStatus::Failed}) {
    PlannerState s;
    s.status = status;
    const auto before = space.record_count();
    const auto r = step(s, TaskInput{"I am thirsty", observe(w)}, space, ConfigParams{}, p);
    EXPECT_EQ(r.command, MotionCommand{Idle{}});
    EXPECT_EQ(s.status, status);
    EXPECT_EQ(space.record_count(), before);
  }
}

TEST(ClosedLoop, CupCompletesWithinSixtySteps) {
  const auto t = episode(scripted("clear-cup"));
  EXPECT_EQ(t.status, EpisodeStatus::Completed);
  EXPECT_LE(t.events.size(), 60u);
  EXPECT_TRUE(t.physical_success);
  EXPECT_TRUE(check_success(t, scripted("clear-cup")).whole);
}

TEST(ClosedLoop, AbsentToolCompletesThroughReformulate) {
  for (const char* id : {"absent-coke", "absent-tape"}) {
    const auto& w = scripted(id);
    const auto t = episode(w);
    EXPECT_EQ(t.status, EpisodeStatus::Completed) << id;
    EXPECT_GE(count_kind(t, "reformulate"), 1) << id;
    const auto flags = check_success(t, w);
    EXPECT_TRUE(flags.whole) << id;
    EXPECT_TRUE(flags.exploration) << id;
    EXPECT_EQ(t.events.back().subgoal_depth, 0) << id;
  }
}

TEST(ClosedLoop, ToolRemovalSwitchesToMsiWithinOneTick) {
  for (const auto& w : removal_scenarios()) {
    const auto t = episode(w, 0.0, 1, 8);
    const int tick = w.injections.front().tick;
    ASSERT_GT(static_cast<int>(t.events.size()), tick + 1) << w.id;
    for (int i = 1; i < tick; ++i) EXPECT_EQ(t.events[i].stream, Stream::ADM) << w.id;
    const bool switched = !t.events[tick].valid && t.events[tick].stream == Stream::MSI;
    const bool next = !t.events[tick + 1].valid && t.events[tick + 1].stream == Stream::MSI;
    EXPECT_TRUE(switched || next) << w.id;
  }
}

TEST(ClosedLoop, UnreachableToolWithoutContainerTimesOut) {
  auto w = scenario::base("lost", "absent");
  w.objects.push_back(scenario::tool("gone", "cup", 1.0, 0.0, Visibility::Absent));
  w.objects.push_back(scenario::tool("d0", "hammer", -1.0, 1.0));
  scenario::bind(w, "I am thirsty", "gone", "cup");
  const auto t = episode(w, 0.0, 1, 30);
  EXPECT_EQ(t.status, EpisodeStatus::Failed);
  EXPECT_EQ(t.failure, FailureReason::Timeout);
  EXPECT_EQ(t.events.size(), 30u);
}

TEST(ClosedLoop, Deterministic) {
  auto strip = [](EpisodeTrace t) {
    for (auto& e : t.events) e.latency_ms = 0;
    t.wall_seconds = 0;
    return t;
  };
  for (const char* id : {"ambiguous-glass", "unrecognizable-sponge", "absent-coke"}) {
    const auto a = strip(episode(scripted(id), 0.5, 9));
    const auto b = strip(episode(scripted(id), 0.5, 9));
    ASSERT_EQ(a.events.size(), b.events.size()) << id;
    for (std::size_t i = 0; i < a.events.size(); ++i) {
      EXPECT_EQ(event_to_json(a.events[i]), event_to_json(b.events[i])) << id << " step " << i;
    }
  }
}

TEST(ClosedLoop, TraceInvariants) {
  for (const auto& w : scripted_scenarios()) {
    for (std::uint64_t seed : {1u, 2u}) {
      const auto t = episode(w, 0.5, seed);
      if (t.status == EpisodeStatus::Completed) {
        EXPECT_EQ(count_kind(t, "manipulate"), 1) << w.id;
        const auto& last = t.events.back();
        ASSERT_TRUE(std::holds_alternative<Manipulate>(last.command));
        ASSERT_TRUE(last.tool_region);
        const auto& m = std::get<Manipulate>(last.command);
        EXPECT_TRUE(last.tool_region->contains(m.operational)) << w.id;
        EXPECT_TRUE(last.tool_region->contains(m.functional)) << w.id;
      }
      for (std::size_t i = 1; i < t.events.size(); ++i) {
        const auto& prev = t.events[i - 1];
        const auto& cur = t.events[i];
        // A second consecutive MSI tick is only allowed after a human answer.
        if (prev.stream == Stream::MSI && cur.stream == Stream::MSI) {
          EXPECT_TRUE(std::holds_alternative<RequestHuman>(prev.command)) << w.id << " step " << i;
        }
      }
    }
  }
}

TEST(ClosedLoop, ThousandTickLatency) {
  auto w = scenario::base("idle", "clear");
  for (int i = 0; i < 8; ++i) w.objects.push_back(scenario::tool("d" + std::to_string(i), "hammer", -3.0 + i, 2.0));
  w.objects.push_back(scenario::tool("gone", "cup", 1.0, 0.0, Visibility::Absent));
  scenario::bind(w, "I am thirsty", "gone", "cup");
  const auto t = episode(w, 0.5, 3, 1000);
  ASSERT_EQ(t.events.size(), 1000u);
  std::vector<double> lat;
  for (const auto& e : t.events) lat.push_back(e.latency_ms);
  std::sort(lat.begin(), lat.end());
  EXPECT_LE(lat[500], 100.0);
  EXPECT_LE(lat[990], 200.0);
}

TEST(EventLog, OneJsonLinePerTick) {
  const auto t = episode(scripted("clear-cup"));
  std::ostringstream out;
  write_event_log(out, t);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step").get<int>(), static_cast<int>(n));
    EXPECT_TRUE(j.contains("stream"));
    EXPECT_TRUE(j.contains("command"));
    EXPECT_TRUE(j.contains("latency_ms"));
    ++n;
  }
  EXPECT_EQ(n, t.events.size());
}
