#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "aide/aide.hpp"

using namespace aide;

namespace {

const RelationshipSpace& corpus_space() {
  static const auto space = default_space(ConfigParams{}, 7, 432);
  return space;
}

void expect_report_arithmetic(const EvalReport& r) {
  for (const auto& [name, m] : r.datasets) {
    EXPECT_LE(m.wsr, std::min({m.tsr, m.osr, m.fsr})) << name;
    for (double v : {m.tsr, m.osr, m.fsr, m.wsr, m.asr, m.esr}) {
      EXPECT_GE(v, 0.0) << name;
      EXPECT_LE(v, 100.0) << name;
    }
    if (m.episodes > 0) EXPECT_GT(m.fps, 0.0) << name;
  }
}

}  // namespace

TEST(GenCorpus, DeterministicBalancedAndBounded) {
  const auto a = gen_corpus(432, 19, 8, 5);
  const auto b = gen_corpus(432, 19, 8, 5);
  ASSERT_EQ(a.size(), 432u);
  std::map<std::string, int> per_class;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(record_to_json(a[i]), record_to_json(b[i]));
    ++per_class[class_of_record(a[i])];
    for (double v : a[i].instruction_affordance.scores()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 10.0);
    }
    ASSERT_EQ(a[i].results.size(), 3u);
    EXPECT_TRUE(a[i].results[0].unseen);
  }
  EXPECT_EQ(per_class.size(), 8u);
  for (const auto& [cls, n] : per_class) EXPECT_EQ(n, 54) << cls;

  const auto odd = gen_corpus(437, 19, 8, 5);
  std::map<std::string, int> counts;
  for (const auto& r : odd) ++counts[class_of_record(r)];
  int lo = 1000, hi = 0;
  for (const auto& [cls, n] : counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  EXPECT_LE(hi - lo, 1);
  EXPECT_NE(record_to_json(gen_corpus(10, 19, 8, 6)[0]), record_to_json(a[0]));
  EXPECT_THROW(gen_corpus(0, 19, 8, 1), ConfigError);
}

TEST(RunEval, NoiselessSuiteIsPerfect) {
  EvalOptions opts;
  const auto r = run_eval(corpus_space(), scripted_scenarios(), ConfigParams{}, opts);
  ASSERT_GE(r.datasets.at("all").episodes, 24);
  for (const auto& [name, m] : r.datasets) {
    EXPECT_EQ(m.wsr, 100.0) << name;
    EXPECT_EQ(m.completed, 100.0) << name;
  }
  EXPECT_EQ(r.datasets.at("absent").asr, 100.0);
  EXPECT_GT(r.datasets.at("absent").asr_episodes, 0);
  expect_report_arithmetic(r);
}

TEST(RunEval, WorkersDoNotChangeOutcomes) {
  EvalOptions one;
  one.noise = 0.5;
  one.seed = 4;
  EvalOptions many = one;
  many.workers = 4;
  const auto a = run_eval(corpus_space(), scripted_scenarios(), ConfigParams{}, one);
  const auto b = run_eval(corpus_space(), scripted_scenarios(), ConfigParams{}, many);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].world, b.rows[i].world);
    EXPECT_EQ(a.rows[i].steps, b.rows[i].steps);
    EXPECT_EQ(a.rows[i].flags.whole, b.rows[i].flags.whole);
    EXPECT_EQ(a.rows[i].correct_frames, b.rows[i].correct_frames);
  }
  expect_report_arithmetic(b);
}

TEST(RunEval, BrokenPerceptionMarksRowSkipped) {
  EvalOptions opts;
  opts.perception = [](const World&, std::uint64_t) -> std::unique_ptr<Perception> {
    throw ConfigError("no backend");
  };
  const auto worlds = household_scenarios();
  const auto r = run_eval(corpus_space(), worlds, ConfigParams{}, opts);
  ASSERT_EQ(r.rows.size(), worlds.size());
  for (const auto& row : r.rows) EXPECT_TRUE(row.skipped);
  EXPECT_EQ(r.datasets.at("all").episodes, 0);
}

TEST(RunEval, ReportDocuments) {
  EvalOptions opts;
  auto r = run_eval(corpus_space(), household_scenarios(), ConfigParams{}, opts);
  r.edr = 100.0;
  const auto j = report_to_json(r);
  EXPECT_EQ(j.at("schema"), "aide-report/1");
  EXPECT_EQ(j.at("episodes").size(), r.rows.size());
  EXPECT_EQ(j.at("EDR"), 100.0);
  const auto text = format_report(r);
  EXPECT_NE(text.find("IoU >= 0.5"), std::string::npos);
  EXPECT_NE(text.find("WSR"), std::string::npos);
}

TEST(ErrorAnalysis, Noiseless) {
  const auto r = run_error_analysis(corpus_space(), removal_scenarios(), reasoner_miss_scenarios(true), ConfigParams{},
                                    0.0, 1);
  EXPECT_EQ(r.injected, 6);
  EXPECT_EQ(r.edr(), 100.0);
  EXPECT_EQ(r.attempted, 6);
  EXPECT_EQ(r.err(), 100.0);
}

TEST(ErrorAnalysis, HintlessSuiteNeverRecovers) {
  const auto r = run_error_analysis(corpus_space(), {}, reasoner_miss_scenarios(false), ConfigParams{}, 0.0, 1);
  EXPECT_EQ(r.attempted, 6);
  EXPECT_EQ(r.err(), 0.0);
}

TEST(Ablation, ShapeAndDeterminism) {
  const auto queries = ablation_queries(200, 19, 8, 3);
  const std::vector<double> cs{40, 20, 10, 0};
  const auto rows = ablate_retrieval(corpus_space(), queries, "affordance", cs, 1);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows.back().label, "ES");
  EXPECT_EQ(rows.back().mean_visited, static_cast<double>(corpus_space().record_count()));
  // Smaller radius, more records visited.
  for (std::size_t i = 1; i < 4; ++i) EXPECT_GE(rows[i].mean_visited, rows[i - 1].mean_visited);
  const auto row_at = [&](const char* label) {
    for (const auto& r : rows)
      if (r.label == label) return r;
    throw std::runtime_error(label);
  };
  EXPECT_GE(row_at("10").accuracy, row_at("40").accuracy);
  EXPECT_GE(row_at("10").class_accuracy, 90.0);
  EXPECT_EQ(row_at("ES").accuracy, 100.0);

  const auto again = ablate_retrieval(corpus_space(), queries, "affordance", cs, 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].accuracy, again[i].accuracy);
    EXPECT_EQ(rows[i].class_accuracy, again[i].class_accuracy);
  }
  EXPECT_THROW(ablate_retrieval(corpus_space(), queries, "bogus", cs, 1), ConfigError);
}

TEST(Ablation, InfiniteRadiusAlwaysAnswers) {
  const auto queries = ablation_queries(100, 19, 8, 4);
  const auto rows = ablate_retrieval(corpus_space(), queries, "affordance", {1e9}, 1);
  EXPECT_EQ(rows.front().class_accuracy, rows.front().class_accuracy);
  for (const auto& q : queries) EXPECT_TRUE(corpus_space().dfs_retrieve(q.vector, 1e9).found());
}

TEST(Ablation, TextSimRuns) {
  const auto queries = ablation_queries(50, 19, 8, 5);
  const auto rows = ablate_retrieval(corpus_space(), queries, "textsim", {0.9, 0.5}, 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows.back().accuracy, 100.0);
  EXPECT_EQ(token_cosine("I am thirsty", "i AM thirsty!"), 1.0);
  EXPECT_EQ(token_cosine("cup", "hammer"), 0.0);
  EXPECT_EQ(token_cosine("", "hammer"), 0.0);
}

TEST(Interactive, CorrectLabelCompletes) {
  const World w = reasoner_miss_scenarios().front();
  const auto instruction = w.instructions().front();
  RelationshipSpace space = corpus_space();
  MockPerception p(w.tables, {});
  std::istringstream in(w.tables.human.at(instruction) + "\n");
  std::ostringstream out;
  const auto t = interactive_episode(w, instruction, space, ConfigParams{}, p, in, out);
  EXPECT_EQ(t.status, EpisodeStatus::Completed);
  EXPECT_TRUE(check_success(t, w).whole);
  EXPECT_NE(out.str().find(instruction), std::string::npos);
}

TEST(Interactive, EmptyInputAborts) {
  const World w = reasoner_miss_scenarios().front();
  RelationshipSpace space = corpus_space();
  MockPerception p(w.tables, {});
  for (const char* input : {"\n", ""}) {
    std::istringstream in(input);
    std::ostringstream out;
    const auto t = interactive_episode(w, w.instructions().front(), space, ConfigParams{}, p, in, out);
    EXPECT_EQ(t.status, EpisodeStatus::Failed);
    EXPECT_EQ(t.failure, FailureReason::HumanAbort);
  }
}

TEST(Interactive, BatchModeNeverBlocks) {
  World w = reasoner_miss_scenarios(false).front();
  RelationshipSpace space = corpus_space();
  MockPerception p(w.tables, {});
  const auto t = run_closed_loop(w.instructions().front(), w, space, ConfigParams{}, p, 60);
  EXPECT_EQ(t.status, EpisodeStatus::Failed);
  EXPECT_EQ(t.failure, FailureReason::PlanningError);
  EXPECT_EQ(t.events.size(), 1u);
}
