#include <gtest/gtest.h>

#include <random>

#include "aide/ers.hpp"
#include "aide/exploration.hpp"
#include "aide/mock_perception.hpp"
#include "aide/scenarios.hpp"
#include "aide/simulator.hpp"
#include "test_support.hpp"

using namespace aide;

namespace {

/// Pool holding one record per tool of `cls`, with catalog images.
CandidatePool class_pool(const std::string& cls) {
  const auto* c = catalog::find_class(cls);
  InstructionRecord r = aide::testing::make_draft("p-" + cls, std::vector<double>(19, 5.0), std::vector<double>(19, 5.0));
  r.results.clear();
  for (auto t : c->tools) r.results.push_back(aide::testing::simple_result(std::string(t)));
  return make_pool(r, {r});
}

const World& scripted(const std::string& id) {
  static const auto worlds = scripted_scenarios();
  for (const auto& w : worlds)
    if (w.id == id) return w;
  throw std::runtime_error("no world " + id);
}

/// Fixed detections and a scripted similarity per crop.
class StubPerception : public MockPerception {
 public:
  std::vector<Detection> dets;
  std::vector<double> sims;  // by detection index
  std::vector<Detection> part_dets;

  std::vector<Detection> detect(const SceneFrame& frame, std::span<const std::string> vocab, int k) override {
    if (!vocab.empty() && vocab.front() == "handle") return part_dets;
    (void)frame;
    std::vector<Detection> out(dets.begin(), dets.begin() + std::min<std::size_t>(dets.size(), k));
    return out;
  }
  MediaRef crop(const SceneFrame&, const Region& box) override {
    for (std::size_t i = 0; i < dets.size(); ++i)
      if (box.contains(dets[i].box)) return MediaRef::image("stub:" + std::to_string(i));
    return MediaRef::image("stub:none");
  }
  SimilarityScore similarity(const MediaRef& a, const MediaRef&) override {
    if (!a.uri.starts_with("stub:") || a.uri == "stub:none") return SimilarityScore(0.0);
    return SimilarityScore(sims.at(std::stoul(a.uri.substr(5))));
  }
};

SceneFrame blank_frame() {
  SceneFrame f;
  f.image = MediaRef::image("stub");
  f.width = 1600;
  f.height = 1200;
  f.raster = std::make_shared<SyntheticRaster>();
  return f;
}

StubPerception stub_with(std::vector<double> sims) {
  StubPerception s;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const int x = static_cast<int>(i) * 120 + 20;
    s.dets.push_back(Detection{"cup", Region{x, 500, x + 40, 580}, 0.9 - 0.01 * static_cast<double>(i),
                               static_cast<int>(i) + 1});
  }
  s.sims = std::move(sims);
  return s;
}

}  // namespace

TEST(MatchTool, ClearCupGroundsOnTheCup) {
  const auto& w = scripted("clear-cup");
  MockPerception p(w.tables, {});
  const auto frame = observe(w);
  const auto out = match_tool(frame, class_pool("drinking"), ConfigParams{}, p);
  ASSERT_TRUE(std::holds_alternative<Grounded>(out));
  const auto& g = std::get<Grounded>(out);
  EXPECT_GT(g.stats.s_max, 0.85);
  EXPECT_EQ(g.result.tool_label, "cup");
  EXPECT_EQ(g.result.tool_region, *w.camera().project(w.find("target")->box, {0, 0}));
}

TEST(MatchTool, GroundedExactlyWhenSMaxAboveM) {
  ConfigParams params;
  const auto pool = class_pool("drinking");
  for (double s : {0.84, 0.85, 0.85 + 1e-9, 0.9, 1.0}) {
    auto stub = stub_with({0.2, s, 0.1});
    const auto out = match_tool(blank_frame(), pool, params, stub);
    EXPECT_EQ(std::holds_alternative<Grounded>(out), s > 0.85) << s;
    const auto& st = std::visit([](const auto& o) -> const MatchStats& { return o.stats; }, out);
    EXPECT_DOUBLE_EQ(st.s_max, std::min(s, SimilarityScore::kMax));
  }
}

TEST(MatchTool, BestOfTopNIsTheFirstMaximum) {
  auto stub = stub_with({0.2, 0.95, 0.95, 0.1});
  const auto out = match_tool(blank_frame(), class_pool("drinking"), ConfigParams{}, stub);
  ASSERT_TRUE(std::holds_alternative<Grounded>(out));
  EXPECT_EQ(std::get<Grounded>(out).tool.rank, 2);
}

TEST(MatchTool, SMaxOnlyCountsTopN) {
  std::vector<double> sims(10, 0.1);
  sims[7] = 0.95;  // rank 8
  auto stub = stub_with(sims);
  const auto out = match_tool(blank_frame(), class_pool("drinking"), ConfigParams{}, stub);
  ASSERT_TRUE(std::holds_alternative<NeedsExploration>(out));
  const auto& st = std::get<NeedsExploration>(out).stats;
  EXPECT_DOUBLE_EQ(st.s_max, 0.1);
  EXPECT_DOUBLE_EQ(st.t_new, 0.95);
}

TEST(MatchTool, EmptySceneNeedsExploration) {
  World w = scenario::base("empty", "clear");
  MockPerception p({}, {});
  const auto out = match_tool(observe(w), class_pool("drinking"), ConfigParams{}, p);
  ASSERT_TRUE(std::holds_alternative<NeedsExploration>(out));
  const auto& st = std::get<NeedsExploration>(out).stats;
  EXPECT_EQ(st.s_max, 0.0);
  EXPECT_EQ(st.t_new, 0.0);
  EXPECT_TRUE(st.detections.empty());
}

TEST(MatchTool, UnrecognizableToolSitsPastTopNAndTriggersVisibleSearch) {
  ConfigParams params;
  for (const auto& w : scripted_scenarios()) {
    if (w.category != "unrecognizable") continue;
    MockPerception p(w.tables, {});
    const auto frame = observe(w);
    const auto* target = w.find("target");
    const auto out = match_tool(frame, class_pool(target->affordance_class), params, p);
    ASSERT_TRUE(std::holds_alternative<NeedsExploration>(out)) << w.id;
    const auto& st = std::get<NeedsExploration>(out).stats;
    EXPECT_EQ(choose_strategy(st.s_max, st.t_new, params), ExplorationKind::Visible) << w.id;
    const auto box = *w.camera().project(target->box, {0, 0});
    int rank = 0;
    for (const auto& d : st.detections)
      if (d.box == box) rank = d.rank;
    EXPECT_GT(rank, params.top_n) << w.id;
    EXPECT_LE(rank, params.upper_candidate_rank()) << w.id;
    const auto region = visible_explore(st.detections, frame.width, frame.height, params);
    EXPECT_TRUE(region.contains(box)) << w.id;
  }
}

TEST(MatchTool, TNewNeverBelowSMax) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> n(0, 15);
  const auto pool = class_pool("drinking");
  for (int t = 0; t < 500; ++t) {
    std::vector<double> sims(n(rng));
    for (auto& s : sims) s = u(rng);
    auto stub = stub_with(sims);
    const auto out = match_tool(blank_frame(), pool, ConfigParams{}, stub);
    const auto& st = std::visit([](const auto& o) -> const MatchStats& { return o.stats; }, out);
    EXPECT_GE(st.t_new, st.s_max);
    EXPECT_LE(st.similarity.size(), 10u);
  }
}

TEST(MatchTool, DeterministicUnderNoise) {
  const auto& w = scripted("ambiguous-glass");
  const auto frame = observe(w);
  auto run = [&] {
    MockPerception p(w.tables, MockSettings::from_noise(0.5, 42, 19));
    const auto out = match_tool(frame, class_pool("drinking"), ConfigParams{}, p);
    return std::visit([](const auto& o) { return o.stats.similarity; }, out);
  };
  EXPECT_EQ(run(), run());
}

TEST(GroundRegions, PartsMatchGroundTruth) {
  ConfigParams params;
  for (const auto& w : scripted_scenarios()) {
    if (w.category != "clear") continue;
    const auto* target = w.find("target");
    if (!target->parts) continue;
    MockPerception p(w.tables, {});
    const auto frame = observe(w);
    const auto out = match_tool(frame, class_pool(target->affordance_class), params, p);
    ASSERT_TRUE(std::holds_alternative<Grounded>(out)) << w.id;
    const auto& g = std::get<Grounded>(out).result;
    const auto truth = *sim::project_parts(w, *target, {0, 0});
    EXPECT_GE(iou(g.operational_region, truth.operational), 0.5) << w.id;
    EXPECT_GE(iou(g.functional_region, truth.functional), 0.5) << w.id;
    EXPECT_TRUE(g.tool_region.contains(g.operational_region));
    EXPECT_TRUE(g.tool_region.contains(g.functional_region));
  }
}

TEST(GroundRegions, FallsBackToSegmenter) {
  ConfigParams params;
  auto stub = stub_with({0.95});
  const Detection tool = stub.dets[0];
  // No exemplars: segmenter halves (the stub frame has no ground truth).
  const auto none = ground_regions(blank_frame(), tool, nullptr, params, stub);
  EXPECT_EQ(none.operational, split_regions(tool.box).operational);
  // Fewer than two part detections.
  const auto pool = class_pool("drinking");
  stub.part_dets = {Detection{"handle", Region{0, 0, 10, 10}, 0.9, 1}};
  const auto one = ground_regions(blank_frame(), tool, &pool, params, stub);
  EXPECT_EQ(one.functional, split_regions(tool.box).functional);
}

TEST(Retrieval, NovelWhenNothingWithinC) {
  ConfigParams params = aide::testing::params_for(2, 2);
  const auto corpus = aide::testing::blob_corpus(2, 20, 0.5, 1);
  const auto space = build_space(corpus.drafts, params, 1);
  const auto far = AffordanceVector::clamped(std::vector<double>(19, 0.0));
  params.retrieve_radius = 1.0;
  EXPECT_TRUE(retrieve_candidates(space, far, params).novel());

  const auto near = retrieve_candidates(space, corpus.drafts.front().instruction_affordance, params);
  ASSERT_FALSE(near.novel());
  EXPECT_FALSE(near.pool->candidates.empty());
  EXPECT_FALSE(near.pool->tool_images.empty());
}

TEST(ErsPipeline, NovelInstructionShortCircuits) {
  const auto& w = scripted("clear-cup");
  MockPerception p({}, {});
  ConfigParams params;
  const auto space = build_space(aide::testing::blob_corpus(2, 20, 0.5, 1).drafts, aide::testing::params_for(2, 2), 1);
  // Unknown instructions score a flat 5 vector, far from the catalog blobs.
  const auto out = ers_pipeline(observe(w), "zzz unknown", space, params, p);
  EXPECT_TRUE(std::holds_alternative<Novel>(out));
}
