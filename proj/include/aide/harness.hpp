#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "aide/affordance_space.hpp"
#include "aide/catalog.hpp"
#include "aide/config.hpp"
#include "aide/mock_perception.hpp"
#include "aide/noise.hpp"
#include "aide/planner.hpp"
#include "aide/simulator.hpp"

namespace aide {

// ---------------------------------------------------------------- corpus

/// Phrasings 0..6 of each class feed the corpus; 7..9 are kept back as
/// held-out queries for the retrieval ablation.
inline constexpr std::size_t kCorpusPhrases = 7;

struct CorpusOptions {
  double sigma = 0.8;           // spread around the class centroid
  double outlier_rate = 0.04;
  double outlier_sigma = 3.0;
};

inline std::vector<double> noisy_centroid(const catalog::AffordanceClass& cls, std::size_t dims, double sigma,
                                          std::uint64_t key) {
  auto v = catalog::centroid_of(cls, dims).scores();
  for (std::size_t i = 0; i < dims; ++i) v[i] += sigma * noise::gaussian(noise::combine(key, i));
  return v;
}

/// `count` synthetic drafts spread round-robin over the first `classes`
/// tool classes. Each carries three catalog results and a storage hint.
inline std::vector<InstructionRecord> gen_corpus(int count, int dims, int classes, std::uint64_t seed,
                                                 const CorpusOptions& opts = {}) {
  if (count <= 0 || dims <= 0 || classes <= 0) throw ConfigError("gen_corpus: sizes must be positive");
  const auto& all = catalog::tool_classes();
  std::vector<InstructionRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto& cls = all[static_cast<std::size_t>(i % classes) % all.size()];
    const auto key = noise::combine(seed, static_cast<std::uint64_t>(i));
    const bool outlier = noise::uniform(noise::combine(key, 0xbad)) < opts.outlier_rate;
    const double s = outlier ? opts.outlier_sigma : opts.sigma;

    InstructionRecord r;
    r.id = "r" + std::to_string(i);
    const std::size_t round = static_cast<std::size_t>(i / classes);
    r.text = std::string(cls.phrases[round % kCorpusPhrases]);
    r.instruction_affordance =
        AffordanceVector::clamped(noisy_centroid(cls, static_cast<std::size_t>(dims), s, noise::combine(key, 1)));
    r.tool_affordance =
        AffordanceVector::clamped(noisy_centroid(cls, static_cast<std::size_t>(dims), s, noise::combine(key, 2)));
    for (std::size_t k = 0; k < 3; ++k) {
      const auto label = std::string(cls.tools[(round + k) % cls.tools.size()]);
      const auto box = std::string(cls.containers[(round + k) % cls.containers.size()]);
      GroundingResult g;
      g.tool_label = label;
      g.tool_image = MediaRef::image("catalog:" + label);
      g.tool_region = Region{0, 0, 100, 200};
      g.operational_region = Region{0, 100, 100, 200};
      g.functional_region = Region{0, 0, 100, 100};
      g.unseen = UnseenHint{box, MediaRef::image("catalog:" + box)};
      r.results.push_back(std::move(g));
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Class that generated a corpus text, by phrase lookup.
inline std::optional<std::string> class_of_phrase(std::string_view text) {
  for (const auto& cls : catalog::tool_classes())
    for (auto p : cls.phrases)
      if (p == text) return std::string(cls.name);
  return std::nullopt;
}

/// Space built from a generated corpus with the configured sizes.
inline RelationshipSpace default_space(const ConfigParams& params, std::uint64_t seed, int count = 0) {
  const int n = count > 0 ? count : params.corpus_size;
  return build_space(gen_corpus(n, params.dims, params.clusters, seed), params, seed);
}

// ---------------------------------------------------------------- evaluation

struct EpisodeRow {
  std::string world;
  std::string category;
  std::string instruction;
  std::uint64_t seed = 0;
  std::string status;
  std::string failure;
  int steps = 0;
  SuccessFlags flags;
  bool physical_success = false;
  int valid_frames = 0;
  int correct_frames = 0;
  double wall_seconds = 0.0;
  double p50_latency_ms = 0.0;
  bool skipped = false;
};

struct Metrics {
  int episodes = 0;
  double tsr = 0, osr = 0, fsr = 0, wsr = 0;
  double asr = 0;          // over episodes whose tool starts hidden
  int asr_episodes = 0;
  double esr = 0;          // over valid frames
  double fps = 0;
  double completed = 0;
};

struct EvalReport {
  std::string scoring_note =
      "success is judged automatically: IoU >= 0.5 against ground-truth boxes replaces human majority voting";
  double noise = 0.0;
  std::map<std::string, Metrics> datasets;  // per category plus "all"
  std::vector<EpisodeRow> rows;
  std::optional<double> edr;
  std::optional<double> err;
};

inline double percent(int num, int den) { return den > 0 ? 100.0 * num / den : 0.0; }

inline Metrics aggregate(const std::vector<const EpisodeRow*>& rows) {
  Metrics m;
  int t = 0, o = 0, f = 0, w = 0, a = 0, an = 0, vf = 0, cf = 0, done = 0, ticks = 0;
  double wall = 0.0;
  for (const auto* r : rows) {
    if (r->skipped) continue;
    ++m.episodes;
    t += r->flags.tool;
    o += r->flags.operational;
    f += r->flags.functional;
    w += r->flags.whole;
    if (r->flags.exploration_applies) {
      ++an;
      a += r->flags.exploration && r->flags.whole;
    }
    vf += r->valid_frames;
    cf += r->correct_frames;
    done += r->status == "completed";
    ticks += r->steps;
    wall += r->wall_seconds;
  }
  m.tsr = percent(t, m.episodes);
  m.osr = percent(o, m.episodes);
  m.fsr = percent(f, m.episodes);
  m.wsr = percent(w, m.episodes);
  m.asr = percent(a, an);
  m.asr_episodes = an;
  m.esr = percent(cf, vf);
  m.completed = percent(done, m.episodes);
  m.fps = wall > 0 ? ticks / wall : 0.0;
  return m;
}

using PerceptionFactory = std::function<std::unique_ptr<Perception>(const World&, std::uint64_t seed)>;

struct EvalOptions {
  double noise = 0.0;
  std::uint64_t seed = 0;
  int workers = 1;
  int max_steps = 60;
  int seeds_per_world = 1;
  PerceptionFactory perception;  // mock perception when empty
  std::function<void(const EpisodeTrace&)> on_trace;
};

inline PerceptionFactory mock_factory(double noise, std::size_t dims) {
  return [noise, dims](const World& w, std::uint64_t seed) -> std::unique_ptr<Perception> {
    return std::make_unique<MockPerception>(w.tables, MockSettings::from_noise(noise, seed, dims));
  };
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

/// One closed-loop episode on a private copy of the space and the world.
inline EpisodeRow run_episode(const World& world, const std::string& instruction, const RelationshipSpace& space,
                              const ConfigParams& params, Perception& perception, int max_steps,
                              EpisodeTrace* trace_out = nullptr, const HumanResponder& responder = batch_responder) {
  World w = world;
  RelationshipSpace local = space;
  auto trace = run_closed_loop(instruction, w, local, params, perception, max_steps, responder);
  EpisodeRow row;
  row.world = world.id;
  row.category = world.category;
  row.instruction = instruction;
  row.status = to_string(trace.status);
  row.failure = to_string(trace.failure);
  row.steps = static_cast<int>(trace.events.size());
  row.flags = check_success(trace, world);
  row.physical_success = trace.physical_success;
  const auto tally = frame_correctness(trace);
  row.valid_frames = tally.valid;
  row.correct_frames = tally.correct;
  row.wall_seconds = trace.wall_seconds;
  std::vector<double> lat;
  for (const auto& e : trace.events) lat.push_back(e.latency_ms);
  row.p50_latency_ms = median(lat);
  if (trace_out) *trace_out = std::move(trace);
  return row;
}

/// Every (world, instruction, seed) episode, possibly on several threads.
inline EvalReport run_eval(const RelationshipSpace& space, const std::vector<World>& worlds, const ConfigParams& params,
                           const EvalOptions& opts = {}) {
  struct Job {
    const World* world;
    std::string instruction;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& w : worlds) {
    for (const auto& instruction : w.instructions()) {
      for (int s = 0; s < std::max(1, opts.seeds_per_world); ++s) {
        jobs.push_back({&w, instruction, noise::combine(opts.seed, noise::hash_string(w.id + "/" + std::to_string(s)))});
      }
    }
  }
  const auto factory = opts.perception ? opts.perception : mock_factory(opts.noise, static_cast<std::size_t>(params.dims));

  EvalReport report;
  report.noise = opts.noise;
  report.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex trace_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& job = jobs[i];
      EpisodeRow row;
      try {
        auto perception = factory(*job.world, job.seed);
        EpisodeTrace trace;
        row = run_episode(*job.world, job.instruction, space, params, *perception, opts.max_steps, &trace);
        if (opts.on_trace) {
          std::lock_guard lock(trace_mutex);
          opts.on_trace(trace);
        }
      } catch (const Error& e) {
        row.world = job.world->id;
        row.category = job.world->category;
        row.instruction = job.instruction;
        row.skipped = true;
        row.failure = e.what();
      }
      row.seed = job.seed;
      report.rows[i] = std::move(row);
    }
  };
  const int n = std::max(1, opts.workers);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::map<std::string, std::vector<const EpisodeRow*>> groups;
  for (const auto& r : report.rows) {
    groups["all"].push_back(&r);
    groups[r.category].push_back(&r);
  }
  for (const auto& [name, rows] : groups) report.datasets[name] = aggregate(rows);
  return report;
}

// ---------------------------------------------------------------- error analysis

struct ErrorReport {
  int injected = 0;
  int detected = 0;
  int attempted = 0;
  int recovered = 0;
  double edr() const { return percent(detected, injected); }
  double err() const { return percent(recovered, attempted); }
};

/// EDR over tool-removal worlds (validity must fail on the removal tick or
/// the one after); ERR over reasoner-miss worlds (episode must ask a human
/// and then succeed).
inline ErrorReport run_error_analysis(const RelationshipSpace& space, const std::vector<World>& removal,
                                      const std::vector<World>& misses, const ConfigParams& params, double noise_sigma,
                                      std::uint64_t seed, int seeds_per_world = 1) {
  ErrorReport out;
  const auto factory = mock_factory(noise_sigma, static_cast<std::size_t>(params.dims));
  for (const auto& w : removal) {
    int tick = -1;
    for (const auto& inj : w.injections)
      if (inj.visibility == Visibility::Absent) tick = inj.tick;
    for (int s = 0; s < seeds_per_world; ++s) {
      for (const auto& instruction : w.instructions()) {
        auto p = factory(w, noise::combine(seed, noise::hash_string(w.id + "#" + std::to_string(s))));
        EpisodeTrace trace;
        run_episode(w, instruction, space, params, *p, tick + 4, &trace);
        ++out.injected;
        bool caught = false;
        for (const auto& e : trace.events) {
          if (e.step >= tick && e.step <= tick + 1 && !e.valid) caught = true;
        }
        out.detected += caught;
      }
    }
  }
  for (const auto& w : misses) {
    for (int s = 0; s < seeds_per_world; ++s) {
      for (const auto& instruction : w.instructions()) {
        auto p = factory(w, noise::combine(seed, noise::hash_string(w.id + "#" + std::to_string(s))));
        EpisodeTrace trace;
        const auto row = run_episode(w, instruction, space, params, *p, 60, &trace);
        ++out.attempted;
        const bool asked = std::any_of(trace.events.begin(), trace.events.end(), [](const TraceEvent& e) {
          return std::holds_alternative<RequestHuman>(e.command);
        });
        out.recovered += asked && row.flags.whole;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- retrieval ablation

struct AblationRow {
  std::string method;   // affordance | textsim
  std::string label;    // threshold as printed, or "ES"
  double threshold = 0.0;
  double mean_seconds = 0.0;
  double accuracy = 0.0;        // percent equal to the exhaustive best record within the threshold
  double class_accuracy = 0.0;  // percent answered with a record of the query's class
  double mean_visited = 0.0;
};

struct AblationQuery {
  std::string text;
  AffordanceVector vector;
  std::string cls;
};

/// Held-out queries: unseen phrasings with freshly drawn vectors.
inline std::vector<AblationQuery> ablation_queries(int count, int dims, int classes, std::uint64_t seed,
                                                   double sigma = 0.8) {
  const auto& all = catalog::tool_classes();
  std::vector<AblationQuery> out;
  for (int i = 0; i < count; ++i) {
    const auto& cls = all[static_cast<std::size_t>(i % classes) % all.size()];
    const auto key = noise::combine(seed ^ 0x9e3779b9ULL, static_cast<std::uint64_t>(i));
    const std::size_t held = kCorpusPhrases + static_cast<std::size_t>(i / classes) % (cls.phrases.size() - kCorpusPhrases);
    out.push_back({std::string(cls.phrases[held]),
                   AffordanceVector::clamped(noisy_centroid(cls, static_cast<std::size_t>(dims), sigma, key)),
                   std::string(cls.name)});
  }
  return out;
}

/// Bag-of-words cosine similarity over lower-cased alphanumeric tokens.
inline double token_cosine(std::string_view a, std::string_view b) {
  auto bag = [](std::string_view s) {
    std::map<std::string, int> m;
    std::string cur;
    for (char c : s) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else if (!cur.empty()) {
        ++m[cur];
        cur.clear();
      }
    }
    if (!cur.empty()) ++m[cur];
    return m;
  };
  const auto ba = bag(a), bb = bag(b);
  double dot = 0, na = 0, nb = 0;
  for (const auto& [w, c] : ba) {
    na += c * c;
    if (auto it = bb.find(w); it != bb.end()) dot += c * it->second;
  }
  for (const auto& [w, c] : bb) nb += c * c;
  return na > 0 && nb > 0 ? dot / std::sqrt(na * nb) : 0.0;
}

inline std::string class_of_record(const InstructionRecord& r) {
  if (auto c = class_of_phrase(r.text)) return *c;
  if (!r.results.empty()) return catalog::class_of_label(r.results.front().tool_label).value_or("");
  return "";
}

/// Runtime and accuracy of DFS retrieval per radius, plus an exhaustive
/// nearest-neighbour row ("ES"). The textsim method scans records in order
/// and takes the first whose token cosine reaches the threshold.
inline std::vector<AblationRow> ablate_retrieval(const RelationshipSpace& space, const std::vector<AblationQuery>& queries,
                                                 const std::string& method, const std::vector<double>& thresholds,
                                                 int repeats = 3) {
  using clock = std::chrono::steady_clock;
  std::vector<const InstructionRecord*> flat;
  space.for_each_record([&](const InstructionRecord& r) { flat.push_back(&r); });
  std::vector<std::string> flat_class;
  for (const auto* r : flat) flat_class.push_back(class_of_record(*r));
  std::map<const InstructionRecord*, std::string> cls_of;
  for (std::size_t i = 0; i < flat.size(); ++i) cls_of[flat[i]] = flat_class[i];

  const bool textsim = method == "textsim";
  if (!textsim && method != "affordance") throw ConfigError("unknown retrieval method '" + method + "'");

  auto score = [&](const AblationQuery& q, const InstructionRecord& r) {
    return textsim ? token_cosine(q.text, r.text) : -distance(q.vector, r.instruction_affordance);
  };
  // Exhaustive best record overall and reference answers per threshold.
  auto exhaustive = [&](const AblationQuery& q) -> const InstructionRecord* {
    const InstructionRecord* best = nullptr;
    double bs = -std::numeric_limits<double>::infinity();
    for (const auto* r : flat) {
      const double s = score(q, *r);
      if (s > bs) {
        bs = s;
        best = r;
      }
    }
    return best;
  };
  auto within = [&](const AblationQuery& q, const InstructionRecord& r, double t) {
    return textsim ? token_cosine(q.text, r.text) >= t : distance(q.vector, r.instruction_affordance) <= t;
  };

  std::vector<AblationRow> out;
  auto run_row = [&](const std::string& label, double t, bool es) {
    AblationRow row;
    row.method = method;
    row.label = label;
    row.threshold = t;
    int same_class = 0, agree = 0;
    double seconds = 0.0, visited = 0.0;
    for (const auto& q : queries) {
      const InstructionRecord* got = nullptr;
      std::size_t seen = 0;
      const auto t0 = clock::now();
      for (int rep = 0; rep < repeats; ++rep) {
        if (es) {
          got = exhaustive(q);
          seen = flat.size();
        } else if (textsim) {
          got = nullptr;
          seen = 0;
          for (const auto* r : flat) {
            ++seen;
            if (token_cosine(q.text, r->text) >= t) {
              got = r;
              break;
            }
          }
        } else {
          const auto hit = space.dfs_retrieve(q.vector, t);
          got = hit.record;
          seen = hit.visited_count;
        }
      }
      seconds += std::chrono::duration<double>(clock::now() - t0).count() / repeats;
      visited += static_cast<double>(seen);
      if (got && cls_of[got] == q.cls) ++same_class;
      // Reference: the best-scoring record that satisfies the threshold.
      const InstructionRecord* ref = nullptr;
      double rs = -std::numeric_limits<double>::infinity();
      for (const auto* r : flat) {
        if (!es && !within(q, *r, t)) continue;
        const double s = score(q, *r);
        if (s > rs) {
          rs = s;
          ref = r;
        }
      }
      agree += got == ref;
    }
    const int n = static_cast<int>(queries.size());
    row.mean_seconds = n ? seconds / n : 0.0;
    row.accuracy = percent(agree, n);
    row.class_accuracy = percent(same_class, n);
    row.mean_visited = n ? visited / n : 0.0;
    out.push_back(row);
  };
  for (double t : thresholds) {
    std::ostringstream label;
    label << t;
    run_row(label.str(), t, false);
  }
  run_row("ES", 0.0, true);
  return out;
}

// ---------------------------------------------------------------- reporting

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"episodes", m.episodes}, {"TSR", m.tsr}, {"OSR", m.osr}, {"FSR", m.fsr}, {"WSR", m.wsr},
          {"ASR", m.asr}, {"ASR_episodes", m.asr_episodes}, {"ESR", m.esr}, {"FPS", m.fps},
          {"completed", m.completed}};
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j{{"schema", "aide-report/1"}, {"scoring", r.scoring_note}, {"noise", r.noise}};
  for (const auto& [name, m] : r.datasets) j["datasets"][name] = metrics_to_json(m);
  if (r.edr) j["EDR"] = *r.edr;
  if (r.err) j["ERR"] = *r.err;
  auto& rows = j["episodes"] = nlohmann::json::array();
  for (const auto& e : r.rows) {
    rows.push_back({{"world", e.world},
                    {"category", e.category},
                    {"instruction", e.instruction},
                    {"seed", e.seed},
                    {"status", e.status},
                    {"failure", e.failure},
                    {"steps", e.steps},
                    {"tool", e.flags.tool},
                    {"operational", e.flags.operational},
                    {"functional", e.flags.functional},
                    {"whole", e.flags.whole},
                    {"exploration", e.flags.exploration},
                    {"physical_success", e.physical_success},
                    {"valid_frames", e.valid_frames},
                    {"correct_frames", e.correct_frames},
                    {"p50_latency_ms", e.p50_latency_ms},
                    {"skipped", e.skipped}});
  }
  return j;
}

inline std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "# " << r.scoring_note << "\n";
  out << "# noise sigma " << r.noise << "\n";
  out << std::left << std::setw(16) << "dataset" << std::right << std::setw(9) << "episodes" << std::setw(8) << "TSR"
      << std::setw(8) << "OSR" << std::setw(8) << "FSR" << std::setw(8) << "WSR" << std::setw(8) << "ASR"
      << std::setw(8) << "ESR" << std::setw(9) << "FPS" << "\n";
  out << std::fixed << std::setprecision(1);
  for (const auto& [name, m] : r.datasets) {
    out << std::left << std::setw(16) << name << std::right << std::setw(9) << m.episodes << std::setw(8) << m.tsr
        << std::setw(8) << m.osr << std::setw(8) << m.fsr << std::setw(8) << m.wsr << std::setw(8);
    if (m.asr_episodes) {
      out << m.asr;
    } else {
      out << "-";
    }
    out << std::setw(8) << m.esr << std::setw(9) << m.fps << "\n";
  }
  if (r.edr) out << "EDR " << *r.edr << "\n";
  if (r.err) out << "ERR " << *r.err << "\n";
  return out.str();
}

inline std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "# accuracy: answer equals the brute-force best record within the threshold (NotFound when none is); "
         "class: answer belongs to the query's class\n";
  out << std::left << std::setw(12) << "method" << std::setw(8) << "c" << std::right << std::setw(12) << "time (s)"
      << std::setw(12) << "accuracy" << std::setw(12) << "class" << std::setw(10) << "visited" << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << r.method << std::setw(8) << r.label << std::right << std::setw(12)
        << std::fixed << std::setprecision(7) << r.mean_seconds << std::setw(12) << std::setprecision(1)
        << r.accuracy << std::setw(12) << r.class_accuracy << std::setw(10) << r.mean_visited << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------- interactive

/// Responder that asks on `out` and reads a tool label from `in`. An empty
/// line (or end of input) aborts the episode.
inline HumanResponder console_responder(std::istream& in, std::ostream& out) {
  return [&in, &out](const World&, const std::string& instruction, const std::string& prompt) -> HumanAnswer {
    out << prompt << " [" << instruction << "] > " << std::flush;
    std::string line;
    if (!std::getline(in, line)) return {std::nullopt, true};
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {std::nullopt, true};
    const auto last = line.find_last_not_of(" \t\r");
    return {line.substr(first, last - first + 1), false};
  };
}

inline EpisodeTrace interactive_episode(World world, const std::string& instruction, RelationshipSpace& space,
                                        const ConfigParams& params, Perception& perception, std::istream& in,
                                        std::ostream& out, int max_steps = 60) {
  return run_closed_loop(instruction, world, space, params, perception, max_steps, console_responder(in, out));
}

}  // namespace aide
