#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "aide/aide.hpp"

using namespace aide;

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string space;
  std::string scenarios;
  std::string report;
  bool interactive = false;
  int workers = 0;
  double noise = -1.0;
};

/// Config file values, overridden by whatever was given on the command line.
ConfigFile resolve(const Options& o, const CLI::App& app) {
  ConfigFile cfg = o.config.empty() ? ConfigFile{} : load_config(o.config);
  if (app.count("--seed")) cfg.seed = o.seed;
  if (!o.space.empty()) cfg.space_path = o.space;
  if (!o.scenarios.empty()) cfg.scenarios_path = o.scenarios;
  if (!o.report.empty()) cfg.report_path = o.report;
  if (o.workers > 0) cfg.workers = o.workers;
  if (o.noise >= 0.0) cfg.noise = o.noise;
  cfg.params.validate();
  return cfg;
}

RelationshipSpace space_for(const ConfigFile& cfg) {
  if (!cfg.space_path.empty() && std::filesystem::exists(cfg.space_path)) return load_space(cfg.space_path);
  return default_space(cfg.params, cfg.seed);
}

/// A directory of world files, or one of the built-in suites by name.
std::vector<World> worlds_for(const std::string& source) {
  if (source.empty() || source == "scripted") return scripted_scenarios();
  if (source == "household") return household_scenarios();
  if (source == "removal") return removal_scenarios();
  if (source == "reasoner-miss") return reasoner_miss_scenarios();
  if (std::filesystem::is_regular_file(source)) return {load_world(source)};
  return load_scenarios(source);
}

PerceptionFactory factory_for(const ConfigFile& cfg) {
  if (cfg.remote.base_url.empty()) return mock_factory(cfg.noise, static_cast<std::size_t>(cfg.params.dims));
  auto remote = std::make_shared<RemotePerception>(cfg.remote);
  // Perception is stateless apart from the breaker, so episodes share one client.
  struct Shared : Perception {
    std::shared_ptr<RemotePerception> p;
    explicit Shared(std::shared_ptr<RemotePerception> r) : p(std::move(r)) {}
    std::vector<Detection> detect(const SceneFrame& f, std::span<const std::string> v, int k) override {
      return p->detect(f, v, k);
    }
    SimilarityScore similarity(const MediaRef& a, const MediaRef& b) override { return p->similarity(a, b); }
    ToolHypothesis propose_tool(std::string_view i, const SceneFrame& f) override { return p->propose_tool(i, f); }
    std::size_t select_candidate(const ToolHypothesis& h, std::span<const Detection> c, const SceneFrame& f) override {
      return p->select_candidate(h, c, f);
    }
    RegionPair segment_regions(const Detection& t, const SceneFrame& f) override { return p->segment_regions(t, f); }
    AffordanceVector score_affordance(const MediaRef& s) override { return p->score_affordance(s); }
    std::string infer_unseen_label(std::string_view i, const SceneFrame& f) override {
      return p->infer_unseen_label(i, f);
    }
    MediaRef crop(const SceneFrame& f, const Region& b) override { return p->crop(f, b); }
  };
  return [remote](const World&, std::uint64_t) -> std::unique_ptr<Perception> {
    return std::make_unique<Shared>(remote);
  };
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string events_path(const std::string& report) {
  auto p = std::filesystem::path(report);
  return p.replace_extension(".events.jsonl").string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-stream tool grounding and planning engine"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "aide-config/1 document")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--space", o.space, "relationship space file");
  app.add_option("--scenarios", o.scenarios, "world directory or file, or scripted|household|removal|reasoner-miss");
  app.add_option("--report", o.report, "report path (JSON; event log goes next to it)");
  app.add_flag("--interactive", o.interactive, "ask on the terminal when the reasoner has no answer");
  app.add_option("--workers", o.workers, "episode threads")->check(CLI::PositiveNumber);
  app.add_option("--noise", o.noise, "mock perception noise sigma")->check(CLI::NonNegativeNumber);

  auto* gen = app.add_subcommand("gen-corpus", "write a synthetic instruction corpus (JSONL)");
  std::string corpus_out = "corpus.jsonl";
  int corpus_count = 0;
  gen->add_option("-o,--out", corpus_out, "output file");
  gen->add_option("-n,--count", corpus_count, "records (default: A)");

  auto* build = app.add_subcommand("build-space", "cluster a corpus into a relationship space");
  std::string corpus_in;
  build->add_option("--corpus", corpus_in, "corpus JSONL (default: generate one)");

  auto* eval = app.add_subcommand("eval", "run every scenario and report the metric suite");
  int seeds_per_world = 1;
  int max_steps = 60;
  eval->add_option("--seeds-per-world", seeds_per_world)->check(CLI::PositiveNumber);
  eval->add_option("--max-steps", max_steps)->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate-retrieval", "compare retrieval radii against exhaustive search");
  std::string method = "affordance";
  std::vector<double> thresholds;
  int query_count = 1000;
  int repeats = 3;
  ablate->add_option("--method", method)->check(CLI::IsMember({"affordance", "textsim"}));
  ablate->add_option("--thresholds", thresholds, "c values (affordance) or cosine cut-offs (textsim)");
  ablate->add_option("--queries", query_count)->check(CLI::PositiveNumber);
  ablate->add_option("--repeats", repeats)->check(CLI::PositiveNumber);

  auto* errors = app.add_subcommand("error-analysis", "detection and recovery rates on injected failures");
  int error_seeds = 1;
  errors->add_option("--seeds-per-world", error_seeds)->check(CLI::PositiveNumber);

  auto* episode = app.add_subcommand("run-episode", "run one instruction in one world and print its event log");
  std::string world_ref;
  std::string instruction;
  episode->add_option("--world", world_ref, "world file or built-in world id")->required();
  episode->add_option("--instruction", instruction, "defaults to the world's first instruction");
  episode->add_option("--max-steps", max_steps)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(o, app);

    if (gen->parsed()) {
      const int n = corpus_count > 0 ? corpus_count : cfg.params.corpus_size;
      const auto drafts = gen_corpus(n, cfg.params.dims, cfg.params.clusters, cfg.seed);
      save_drafts(drafts, corpus_out);
      std::cout << "wrote " << drafts.size() << " records to " << corpus_out << '\n';
      return 0;
    }

    if (build->parsed()) {
      auto drafts = corpus_in.empty() ? gen_corpus(cfg.params.corpus_size, cfg.params.dims, cfg.params.clusters, cfg.seed)
                                      : load_drafts(corpus_in);
      const auto space = build_space(std::move(drafts), cfg.params, cfg.seed);
      const auto path = cfg.space_path.empty() ? std::string("space.json") : cfg.space_path;
      save_space(space, path);
      std::cout << "kept " << space.record_count() << " records in " << path << '\n';
      return 0;
    }

    if (eval->parsed()) {
      const auto space = space_for(cfg);
      const auto worlds = worlds_for(cfg.scenarios_path);
      EvalOptions opts;
      opts.noise = cfg.noise;
      opts.seed = cfg.seed;
      opts.workers = cfg.workers;
      opts.max_steps = max_steps;
      opts.seeds_per_world = seeds_per_world;
      opts.perception = factory_for(cfg);
      std::ostringstream events;
      opts.on_trace = [&events](const EpisodeTrace& t) { write_event_log(events, t); };
      const auto report = run_eval(space, worlds, cfg.params, opts);
      std::cout << format_report(report);
      if (!cfg.report_path.empty()) {
        write_file(cfg.report_path, report_to_json(report).dump(2) + "\n");
        write_file(events_path(cfg.report_path), events.str());
        std::cout << "report: " << cfg.report_path << "\nevents: " << events_path(cfg.report_path) << '\n';
      }
      return 0;
    }

    if (ablate->parsed()) {
      const auto space = space_for(cfg);
      if (thresholds.empty()) {
        thresholds = method == "affordance" ? std::vector<double>{40, 20, 10, 0} : std::vector<double>{0.9, 0.7, 0.5};
      }
      const auto queries = ablation_queries(query_count, cfg.params.dims, cfg.params.clusters, cfg.seed + 1);
      const auto rows = ablate_retrieval(space, queries, method, thresholds, repeats);
      std::cout << format_ablation(rows);
      if (!cfg.report_path.empty()) {
        auto doc = nlohmann::json::array();
        for (const auto& r : rows) {
          doc.push_back({{"method", r.method},
                         {"label", r.label},
                         {"threshold", r.threshold},
                         {"mean_seconds", r.mean_seconds},
                         {"accuracy", r.accuracy},
                         {"class_accuracy", r.class_accuracy},
                         {"mean_visited", r.mean_visited}});
        }
        write_file(cfg.report_path, doc.dump(2) + "\n");
      }
      return 0;
    }

    if (errors->parsed()) {
      const auto space = space_for(cfg);
      const auto r = run_error_analysis(space, removal_scenarios(), reasoner_miss_scenarios(), cfg.params, cfg.noise,
                                        cfg.seed, error_seeds);
      std::cout << "EDR " << r.detected << "/" << r.injected << " = " << r.edr() << "%\n"
                << "ERR " << r.recovered << "/" << r.attempted << " = " << r.err() << "%\n";
      if (!cfg.report_path.empty()) {
        const nlohmann::json doc{{"injected", r.injected}, {"detected", r.detected}, {"EDR", r.edr()},
                                 {"attempted", r.attempted}, {"recovered", r.recovered}, {"ERR", r.err()},
                                 {"noise", cfg.noise}};
        write_file(cfg.report_path, doc.dump(2) + "\n");
      }
      return 0;
    }

    if (episode->parsed()) {
      std::optional<World> world;
      if (std::filesystem::is_regular_file(world_ref)) {
        world = load_world(world_ref);
      } else {
        for (auto suite : {scripted_scenarios(), household_scenarios(), removal_scenarios(), reasoner_miss_scenarios()})
          for (auto& w : suite)
            if (!world && w.id == world_ref) world = std::move(w);
      }
      if (!world) throw ConfigError("no world file or built-in world named '" + world_ref + "'");
      if (instruction.empty()) {
        const auto all = world->instructions();
        if (all.empty()) throw ConfigError("world '" + world->id + "' has no instructions");
        instruction = all.front();
      }
      auto space = space_for(cfg);
      auto perception = factory_for(cfg)(*world, cfg.seed);
      const auto responder = o.interactive ? console_responder(std::cin, std::cerr) : HumanResponder(batch_responder);
      const World initial = *world;
      const auto trace = run_closed_loop(instruction, *world, space, cfg.params, *perception, max_steps, responder);
      write_event_log(std::cout, trace);
      const auto flags = check_success(trace, initial);
      std::cerr << to_string(trace.status);
      if (trace.failure != FailureReason::None) std::cerr << " (" << to_string(trace.failure) << ")";
      std::cerr << " tool=" << flags.tool << " operational=" << flags.operational << " functional=" << flags.functional
                << '\n';
      if (!cfg.report_path.empty()) {
        std::ostringstream log;
        write_event_log(log, trace);
        write_file(cfg.report_path, log.str());
      }
      return trace.status == EpisodeStatus::Completed ? 0 : 3;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
