#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "aide/errors.hpp"
#include "aide/geometry.hpp"

namespace aide {

/// Tunables shared by every stage. Defaults are the published operating point.
struct ConfigParams {
  int corpus_size = 1500;            // A
  int index_size = 1368;             // T (informational; the D filter decides)
  int dims = 19;                     // X
  int clusters = 8;                  // a
  int subclusters = 3;               // b
  double filter_radius = 25.0;       // D
  double retrieve_radius = 10.0;     // c
  double candidate_radius = 15.0;    // d
  double match_threshold = 0.85;     // m
  int top_n = 5;                     // N
  int top_n_prime = 40;              // N'
  int square_half_side = 250;        // PX
  int candidate_upper_rank = 0;      // 0 means 2N
  double strategy_threshold = 0.75;
  double validity_threshold = 0.5;
  double region_accept_threshold = 0.5;
  int frame_period_ms = 100;

  // Embodiment.
  double near_radius = 1.0;          // R_near, world units
  double speed = 5.0;                // world units per second
  double pixels_per_unit = 100.0;
  int frame_width = 1600;
  int frame_height = 1200;
  int max_subgoal_depth = 4;

  int upper_candidate_rank() const {
    return candidate_upper_rank > 0 ? candidate_upper_rank : 2 * top_n;
  }
  double step_length() const { return speed * frame_period_ms / 1000.0; }
  Camera camera() const { return Camera{pixels_per_unit, frame_width, frame_height}; }

  /// Throws ConfigError on the first violated invariant.
  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid config: ") + what);
    };
    require(dims > 0, "X must be positive");
    require(clusters > 0 && subclusters > 0, "a and b must be positive");
    require(corpus_size > 0, "A must be positive");
    require(filter_radius >= 0 && retrieve_radius >= 0 && candidate_radius >= 0,
            "distances must be non-negative");
    require(match_threshold > 0.0 && match_threshold < 1.0, "m must lie in (0, 1)");
    require(top_n >= 1, "N must be at least 1");
    require(top_n < top_n_prime, "N must be smaller than N'");
    require(upper_candidate_rank() > top_n, "candidate upper rank must exceed N");
    require(square_half_side >= 0, "PX must be non-negative");
    require(frame_period_ms > 0, "frame period must be positive");
    require(near_radius >= 0 && speed >= 0 && pixels_per_unit > 0, "embodiment values");
    require(frame_width > 0 && frame_height > 0, "frame size must be positive");
    require(max_subgoal_depth >= 1, "subgoal depth must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ConfigParams& p) {
  j = nlohmann::json{{"A", p.corpus_size},
                     {"T", p.index_size},
                     {"X", p.dims},
                     {"a", p.clusters},
                     {"b", p.subclusters},
                     {"D", p.filter_radius},
                     {"c", p.retrieve_radius},
                     {"d", p.candidate_radius},
                     {"m", p.match_threshold},
                     {"N", p.top_n},
                     {"N_prime", p.top_n_prime},
                     {"PX", p.square_half_side},
                     {"candidate_upper_rank", p.candidate_upper_rank},
                     {"strategy_threshold", p.strategy_threshold},
                     {"validity_threshold", p.validity_threshold},
                     {"region_accept_threshold", p.region_accept_threshold},
                     {"frame_period_ms", p.frame_period_ms},
                     {"near_radius", p.near_radius},
                     {"speed", p.speed},
                     {"pixels_per_unit", p.pixels_per_unit},
                     {"frame_width", p.frame_width},
                     {"frame_height", p.frame_height},
                     {"max_subgoal_depth", p.max_subgoal_depth}};
}

// Missing keys keep their defaults so partial config files are accepted.
inline void from_json(const nlohmann::json& j, ConfigParams& p) {
  auto get = [&j](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) it->get_to(field);
  };
  get("A", p.corpus_size);
  get("T", p.index_size);
  get("X", p.dims);
  get("a", p.clusters);
  get("b", p.subclusters);
  get("D", p.filter_radius);
  get("c", p.retrieve_radius);
  get("d", p.candidate_radius);
  get("m", p.match_threshold);
  get("N", p.top_n);
  get("N_prime", p.top_n_prime);
  get("PX", p.square_half_side);
  get("candidate_upper_rank", p.candidate_upper_rank);
  get("strategy_threshold", p.strategy_threshold);
  get("validity_threshold", p.validity_threshold);
  get("region_accept_threshold", p.region_accept_threshold);
  get("frame_period_ms", p.frame_period_ms);
  get("near_radius", p.near_radius);
  get("speed", p.speed);
  get("pixels_per_unit", p.pixels_per_unit);
  get("frame_width", p.frame_width);
  get("frame_height", p.frame_height);
  get("max_subgoal_depth", p.max_subgoal_depth);
}

inline constexpr const char* kConfigSchema = "aide-config/1";

/// Contents of an "aide-config/1" document.
/// Remote perception service. An empty base URL selects the mock backend.
struct RemoteConfig {
  std::string base_url;
  std::string api_key_env = "AIDE_API_KEY";
  int timeout_ms = 100;
  int failure_threshold = 3;
  int cooldown_ms = 5000;
};

struct ConfigFile {
  ConfigParams params;
  RemoteConfig remote;
  std::string space_path;
  std::string scenarios_path;
  std::string report_path;
  double noise = 0.0;
  std::uint64_t seed = 0;
  int workers = 1;
};

inline ConfigFile parse_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("config: expected an object");
  const auto schema = doc.value("schema", std::string{});
  if (schema != kConfigSchema) {
    throw VersionError("config: expected schema '" + std::string(kConfigSchema) + "', got '" +
                       schema + "'");
  }
  ConfigFile cfg;
  try {
    if (doc.contains("params")) doc.at("params").get_to(cfg.params);
    if (doc.contains("paths")) {
      const auto& paths = doc.at("paths");
      cfg.space_path = paths.value("space", std::string{});
      cfg.scenarios_path = paths.value("scenarios", std::string{});
      cfg.report_path = paths.value("report", std::string{});
    }
    if (doc.contains("remote")) {
      const auto& r = doc.at("remote");
      cfg.remote.base_url = r.value("base_url", std::string{});
      cfg.remote.api_key_env = r.value("api_key_env", cfg.remote.api_key_env);
      cfg.remote.timeout_ms = r.value("timeout_ms", cfg.remote.timeout_ms);
      cfg.remote.failure_threshold = r.value("failure_threshold", cfg.remote.failure_threshold);
      cfg.remote.cooldown_ms = r.value("cooldown_ms", cfg.remote.cooldown_ms);
      if (cfg.remote.timeout_ms <= 0 || cfg.remote.failure_threshold <= 0 || cfg.remote.cooldown_ms < 0) {
        throw ConfigError("config: remote timeouts and thresholds must be positive");
      }
    }
    cfg.noise = doc.value("noise", 0.0);
    cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.workers = doc.value("workers", 1);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  cfg.params.validate();
  return cfg;
}

inline ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(doc);
}

inline nlohmann::json config_document(const ConfigFile& cfg) {
  return nlohmann::json{{"schema", kConfigSchema},
                        {"params", cfg.params},
                        {"paths",
                         {{"space", cfg.space_path},
                          {"scenarios", cfg.scenarios_path},
                          {"report", cfg.report_path}}},
                        {"remote",
                         {{"base_url", cfg.remote.base_url},
                          {"api_key_env", cfg.remote.api_key_env},
                          {"timeout_ms", cfg.remote.timeout_ms},
                          {"failure_threshold", cfg.remote.failure_threshold},
                          {"cooldown_ms", cfg.remote.cooldown_ms}}},
                        {"noise", cfg.noise},
                        {"seed", cfg.seed},
                        {"workers", cfg.workers}};
}

}  // namespace aide
