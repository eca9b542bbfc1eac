#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aide/config.hpp"
#include "aide/errors.hpp"
#include "aide/geometry.hpp"
#include "aide/kmeans.hpp"
#include "aide/media.hpp"
#include "aide/noise.hpp"

namespace aide {

inline constexpr double kAffordanceMin = 0.0;
inline constexpr double kAffordanceMax = 10.0;

/// X affordance ratings, each in [0, 10].
class AffordanceVector {
 public:
  AffordanceVector() = default;

  /// Throws DimensionError on an empty vector and Error on an out-of-range score.
  explicit AffordanceVector(std::vector<double> scores) : scores_(std::move(scores)) {
    if (scores_.empty()) throw DimensionError("affordance vector must not be empty");
    for (double s : scores_) {
      if (!std::isfinite(s) || s < kAffordanceMin || s > kAffordanceMax) {
        throw Error("affordance score out of range [0, 10]: " + std::to_string(s));
      }
    }
  }

  static AffordanceVector uniform(std::size_t dims, double value) {
    return AffordanceVector(std::vector<double>(dims, value));
  }

  /// Clamps each entry into range instead of rejecting it.
  static AffordanceVector clamped(std::vector<double> scores) {
    for (double& s : scores) {
      s = std::isfinite(s) ? std::clamp(s, kAffordanceMin, kAffordanceMax) : 0.5 * kAffordanceMax;
    }
    return AffordanceVector(std::move(scores));
  }

  std::size_t size() const { return scores_.size(); }
  double operator[](std::size_t i) const { return scores_[i]; }
  const std::vector<double>& scores() const { return scores_; }

  friend bool operator==(const AffordanceVector&, const AffordanceVector&) = default;

 private:
  std::vector<double> scores_;
};

/// Euclidean distance in affordance units.
inline double distance(const AffordanceVector& u, const AffordanceVector& v) {
  if (u.size() != v.size()) {
    throw DimensionError("affordance dimension mismatch: " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  return std::sqrt(squared_distance(u.scores(), v.scores()));
}

struct UnseenHint {
  std::string label;
  MediaRef image;

  friend bool operator==(const UnseenHint&, const UnseenHint&) = default;
};

/// One task grounding: which tool, where it is, and which parts to use.
struct GroundingResult {
  std::string tool_label;
  MediaRef tool_image;
  Region tool_region;
  Region operational_region;
  Region functional_region;
  std::optional<UnseenHint> unseen;

  bool regions_consistent() const {
    return tool_region.contains(operational_region) && tool_region.contains(functional_region);
  }

  friend bool operator==(const GroundingResult&, const GroundingResult&) = default;
};

struct InstructionRecord {
  std::string id;
  std::string text;
  AffordanceVector instruction_affordance;
  AffordanceVector tool_affordance;
  int cluster_id = -1;
  int subcluster_id = -1;
  std::vector<GroundingResult> results;

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

struct Subcluster {
  AffordanceVector centroid;
  std::vector<InstructionRecord> records;
};

struct Cluster {
  AffordanceVector centroid;
  std::vector<Subcluster> subclusters;
};

/// Outcome of a DFS lookup. `record` is null when nothing lies within c;
/// the pointer is invalidated by any later insert.
struct RetrievalResult {
  const InstructionRecord* record = nullptr;
  std::size_t visited_count = 0;

  bool found() const { return record != nullptr; }
};

/// Two-level k-means index over instruction affordance vectors. Reads are
/// safe to share across threads; insert() needs exclusive access.
class RelationshipSpace {
 public:
  RelationshipSpace() = default;
  RelationshipSpace(ConfigParams params, std::vector<Cluster> clusters)
      : params_(std::move(params)), clusters_(std::move(clusters)) {
    rebuild_index();
  }

  const ConfigParams& params() const { return params_; }
  const std::vector<Cluster>& clusters() const { return clusters_; }
  std::size_t record_count() const { return index_.size(); }
  std::size_t dims() const { return static_cast<std::size_t>(params_.dims); }

  const InstructionRecord* find(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return nullptr;
    return &clusters_[it->second.cluster].subclusters[it->second.subcluster]
                .records[it->second.position];
  }

  const Subcluster& subcluster_of(const InstructionRecord& r) const {
    return clusters_.at(static_cast<std::size_t>(r.cluster_id))
        .subclusters.at(static_cast<std::size_t>(r.subcluster_id));
  }

  template <typename Fn>
  void for_each_record(Fn&& fn) const {
    for (const auto& c : clusters_)
      for (const auto& s : c.subclusters)
        for (const auto& r : s.records) fn(r);
  }

  /// Depth-first search: clusters, then subclusters, by ascending centroid
  /// distance (lowest index on ties); records in stored order. Returns the
  /// first record whose instruction vector lies within `radius` of `query`.
  RetrievalResult dfs_retrieve(const AffordanceVector& query, double radius) const {
    check_dims(query);
    RetrievalResult out;
    for (std::size_t ci : order_by_distance(query, clusters_)) {
      const auto& cluster = clusters_[ci];
      for (std::size_t si : order_by_distance(query, cluster.subclusters)) {
        for (const auto& rec : cluster.subclusters[si].records) {
          ++out.visited_count;
          if (distance(query, rec.instruction_affordance) <= radius) {
            out.record = &rec;
            return out;
          }
        }
      }
    }
    return out;
  }

  /// Records of the anchor's subcluster whose tool vectors lie within
  /// `radius` of the anchor's, ordered by (distance, id).
  std::vector<InstructionRecord> candidate_set(const InstructionRecord& anchor,
                                               double radius) const {
    const auto* stored = find(anchor.id);
    if (stored == nullptr) throw Error("candidate_set: anchor '" + anchor.id + "' not in space");
    std::vector<std::pair<double, const InstructionRecord*>> hits;
    for (const auto& rec : subcluster_of(*stored).records) {
      const double dist = distance(stored->tool_affordance, rec.tool_affordance);
      if (dist <= radius) hits.emplace_back(dist, &rec);
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second->id < b.second->id;
    });
    std::vector<InstructionRecord> out;
    out.reserve(hits.size());
    for (const auto& [dist, rec] : hits) out.push_back(*rec);
    return out;
  }

  /// Places the record under its nearest cluster and subcluster without
  /// moving any centroid. Returns the stored copy.
  const InstructionRecord& insert(InstructionRecord record) {
    check_dims(record.instruction_affordance);
    check_dims(record.tool_affordance);
    if (record.results.empty()) throw Error("insert: record needs at least one grounding result");
    if (record.id.empty()) throw Error("insert: record id must not be empty");
    if (index_.contains(record.id)) throw DuplicateIdError("duplicate record id: " + record.id);
    if (clusters_.empty()) throw Error("insert: space has no clusters");

    const auto ci = nearest_index(record.instruction_affordance, clusters_);
    auto& cluster = clusters_[ci];
    const auto si = nearest_index(record.instruction_affordance, cluster.subclusters);
    auto& sub = cluster.subclusters[si];
    record.cluster_id = static_cast<int>(ci);
    record.subcluster_id = static_cast<int>(si);
    sub.records.push_back(std::move(record));
    index_.emplace(sub.records.back().id, Location{ci, si, sub.records.size() - 1});
    return sub.records.back();
  }

  /// Structural equality: params, centroids, and records in stored order.
  friend bool operator==(const RelationshipSpace& a, const RelationshipSpace& b) {
    nlohmann::json ja, jb;
    to_json(ja, a.params_);
    to_json(jb, b.params_);
    if (ja != jb || a.clusters_.size() != b.clusters_.size()) return false;
    for (std::size_t c = 0; c < a.clusters_.size(); ++c) {
      const auto& ca = a.clusters_[c];
      const auto& cb = b.clusters_[c];
      if (ca.centroid != cb.centroid || ca.subclusters.size() != cb.subclusters.size()) {
        return false;
      }
      for (std::size_t s = 0; s < ca.subclusters.size(); ++s) {
        if (ca.subclusters[s].centroid != cb.subclusters[s].centroid ||
            ca.subclusters[s].records != cb.subclusters[s].records) {
          return false;
        }
      }
    }
    return true;
  }

 private:
  struct Location {
    std::size_t cluster;
    std::size_t subcluster;
    std::size_t position;
  };

  void check_dims(const AffordanceVector& v) const {
    if (v.size() != dims()) {
      throw DimensionError("expected " + std::to_string(dims()) + " affordance dimensions, got " +
                           std::to_string(v.size()));
    }
  }

  template <typename Node>
  static std::vector<std::size_t> order_by_distance(const AffordanceVector& q,
                                                    const std::vector<Node>& nodes) {
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      keyed.emplace_back(squared_distance(q.scores(), nodes[i].centroid.scores()), i);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> order;
    order.reserve(keyed.size());
    for (const auto& k : keyed) order.push_back(k.second);
    return order;
  }

  template <typename Node>
  static std::size_t nearest_index(const AffordanceVector& q, const std::vector<Node>& nodes) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = squared_distance(q.scores(), nodes[i].centroid.scores());
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  void rebuild_index() {
    index_.clear();
    for (std::size_t c = 0; c < clusters_.size(); ++c) {
      for (std::size_t s = 0; s < clusters_[c].subclusters.size(); ++s) {
        const auto& recs = clusters_[c].subclusters[s].records;
        for (std::size_t i = 0; i < recs.size(); ++i) {
          if (!index_.emplace(recs[i].id, Location{c, s, i}).second) {
            throw DuplicateIdError("duplicate record id: " + recs[i].id);
          }
        }
      }
    }
  }

  ConfigParams params_;
  std::vector<Cluster> clusters_;
  std::unordered_map<std::string, Location> index_;
};

inline RetrievalResult dfs_retrieve(const RelationshipSpace& space, const AffordanceVector& query,
                                    double radius) {
  return space.dfs_retrieve(query, radius);
}

inline std::vector<InstructionRecord> candidate_set(const RelationshipSpace& space,
                                                    const InstructionRecord& anchor,
                                                    double radius) {
  return space.candidate_set(anchor, radius);
}

inline const InstructionRecord& insert_record(RelationshipSpace& space, InstructionRecord record) {
  return space.insert(std::move(record));
}

/// Builds the index: k-means (k = a) over instruction vectors, drop every
/// draft whose instruction or tool vector is farther than D from its cluster
/// centroid, then k-means (k = b) inside each cluster over the survivors.
/// Drafts without an id get "r<position>". Deterministic for a given seed.
inline RelationshipSpace build_space(std::vector<InstructionRecord> drafts,
                                     const ConfigParams& params, std::uint64_t seed) {
  params.validate();
  if (drafts.empty()) throw BuildError("build_space: no records");
  const auto dims = static_cast<std::size_t>(params.dims);
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    auto& d = drafts[i];
    if (d.instruction_affordance.size() != dims || d.tool_affordance.size() != dims) {
      throw DimensionError("draft " + std::to_string(i) + " has the wrong affordance dimension");
    }
    if (d.results.empty()) throw BuildError("draft " + std::to_string(i) + " has no results");
    if (d.id.empty()) d.id = "r" + std::to_string(i);
    if (!ids.insert(d.id).second) throw DuplicateIdError("duplicate record id: " + d.id);
  }

  using Point = std::vector<double>;
  const auto k_top = static_cast<std::size_t>(params.clusters);
  const auto k_sub = static_cast<std::size_t>(params.subclusters);

  std::vector<Point> points;
  points.reserve(drafts.size());
  for (const auto& d : drafts) points.push_back(d.instruction_affordance.scores());
  const auto top = kmeans(std::span<const Point>(points), k_top, seed);

  std::vector<std::vector<std::size_t>> members(k_top);
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& centroid = top.centroids[top.assignment[i]];
    const double di = std::sqrt(squared_distance(drafts[i].instruction_affordance.scores(), centroid));
    const double dt = std::sqrt(squared_distance(drafts[i].tool_affordance.scores(), centroid));
    if (di <= params.filter_radius && dt <= params.filter_radius) {
      members[top.assignment[i]].push_back(i);
      ++survivors;
    }
  }
  if (survivors < k_top) {
    throw BuildError("build_space: only " + std::to_string(survivors) +
                     " records survive the distance filter, need at least " +
                     std::to_string(k_top));
  }

  std::vector<Cluster> clusters(k_top);
  for (std::size_t c = 0; c < k_top; ++c) {
    auto& cluster = clusters[c];
    cluster.centroid = AffordanceVector::clamped(top.centroids[c]);
    cluster.subclusters.resize(k_sub);
    if (members[c].empty()) {
      for (auto& s : cluster.subclusters) s.centroid = cluster.centroid;
      continue;
    }
    std::vector<Point> sub_points;
    for (std::size_t i : members[c]) sub_points.push_back(points[i]);
    const auto sub = kmeans(std::span<const Point>(sub_points), k_sub, noise::combine(seed, c + 1));
    for (std::size_t s = 0; s < k_sub; ++s) {
      cluster.subclusters[s].centroid = AffordanceVector::clamped(sub.centroids[s]);
    }
    for (std::size_t j = 0; j < members[c].size(); ++j) {
      auto rec = std::move(drafts[members[c][j]]);
      rec.cluster_id = static_cast<int>(c);
      rec.subcluster_id = static_cast<int>(sub.assignment[j]);
      cluster.subclusters[sub.assignment[j]].records.push_back(std::move(rec));
    }
  }
  return RelationshipSpace(params, std::move(clusters));
}

// ---------------------------------------------------------------------------
// Persistence. Spaces are "aide-space/1" JSON documents; draft corpora are
// line-delimited JSON with one record per line in the same field schema.

inline constexpr const char* kSpaceSchema = "aide-space/1";

inline nlohmann::json region_to_json(const Region& r) {
  return nlohmann::json::array({r.x_min, r.y_min, r.x_max, r.y_max});
}

inline Region region_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("region must be an array of 4 integers");
  Region r{j[0].get<std::int32_t>(), j[1].get<std::int32_t>(), j[2].get<std::int32_t>(),
           j[3].get<std::int32_t>()};
  if (!r.valid()) throw FormatError("region has negative or inverted coordinates");
  return r;
}

inline nlohmann::json grounding_to_json(const GroundingResult& g) {
  nlohmann::json j{{"tool_label", g.tool_label},
                   {"tool_image", g.tool_image.uri},
                   {"tool_region", region_to_json(g.tool_region)},
                   {"operational_region", region_to_json(g.operational_region)},
                   {"functional_region", region_to_json(g.functional_region)}};
  if (g.unseen) {
    j["unseen_region_label"] = g.unseen->label;
    j["unseen_region_image"] = g.unseen->image.uri;
  }
  return j;
}

inline GroundingResult grounding_from_json(const nlohmann::json& j) {
  GroundingResult g;
  g.tool_label = j.at("tool_label").get<std::string>();
  g.tool_image = MediaRef{j.at("tool_image").get<std::string>()};
  g.tool_region = region_from_json(j.at("tool_region"));
  g.operational_region = region_from_json(j.at("operational_region"));
  g.functional_region = region_from_json(j.at("functional_region"));
  const bool has_label = j.contains("unseen_region_label");
  const bool has_image = j.contains("unseen_region_image");
  if (has_label != has_image) {
    throw FormatError("unseen_region_label and unseen_region_image must appear together");
  }
  if (has_label) {
    g.unseen = UnseenHint{j.at("unseen_region_label").get<std::string>(),
                          MediaRef{j.at("unseen_region_image").get<std::string>()}};
  }
  if (!g.regions_consistent()) {
    throw FormatError("operational/functional regions must lie inside the tool region");
  }
  return g;
}

inline nlohmann::json record_to_json(const InstructionRecord& r, bool with_assignment = true) {
  nlohmann::json j{{"id", r.id},
                   {"text", r.text},
                   {"instruction_affordance", r.instruction_affordance.scores()},
                   {"tool_affordance", r.tool_affordance.scores()}};
  if (with_assignment) {
    j["cluster_id"] = r.cluster_id;
    j["subcluster_id"] = r.subcluster_id;
  }
  auto& results = j["results"] = nlohmann::json::array();
  for (const auto& g : r.results) results.push_back(grounding_to_json(g));
  return j;
}

inline InstructionRecord record_from_json(const nlohmann::json& j) {
  InstructionRecord r;
  r.id = j.value("id", std::string{});
  r.text = j.at("text").get<std::string>();
  r.instruction_affordance =
      AffordanceVector(j.at("instruction_affordance").get<std::vector<double>>());
  r.tool_affordance = AffordanceVector(j.at("tool_affordance").get<std::vector<double>>());
  r.cluster_id = j.value("cluster_id", -1);
  r.subcluster_id = j.value("subcluster_id", -1);
  for (const auto& g : j.at("results")) r.results.push_back(grounding_from_json(g));
  if (r.results.empty() || r.results.size() > 3) {
    throw FormatError("record '" + r.id + "' must carry 1 to 3 grounding results");
  }
  return r;
}

inline nlohmann::json space_to_json(const RelationshipSpace& space) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : space.clusters()) {
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& s : c.subclusters) {
      nlohmann::json recs = nlohmann::json::array();
      for (const auto& r : s.records) recs.push_back(record_to_json(r));
      subs.push_back({{"centroid", s.centroid.scores()}, {"records", std::move(recs)}});
    }
    clusters.push_back({{"centroid", c.centroid.scores()}, {"subclusters", std::move(subs)}});
  }
  nlohmann::json params;
  to_json(params, space.params());
  return nlohmann::json{{"schema", kSpaceSchema},
                        {"params", std::move(params)},
                        {"record_count", space.record_count()},
                        {"clusters", std::move(clusters)}};
}

/// Validates the schema tag and the tree shape; throws before anything is
/// returned, so a bad document never yields a partial space.
inline RelationshipSpace space_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("space: expected a JSON object");
  const auto schema = doc.value("schema", std::string{});
  if (schema != kSpaceSchema) {
    throw VersionError("space: expected schema '" + std::string(kSpaceSchema) + "', got '" +
                       schema + "'");
  }
  try {
    ConfigParams params;
    doc.at("params").get_to(params);
    params.validate();
    const auto dims = static_cast<std::size_t>(params.dims);
    auto vec = [dims](const nlohmann::json& j) {
      AffordanceVector v(j.get<std::vector<double>>());
      if (v.size() != dims) throw DimensionError("space: centroid has the wrong dimension");
      return v;
    };
    const auto& jclusters = doc.at("clusters");
    if (jclusters.size() != static_cast<std::size_t>(params.clusters)) {
      throw FormatError("space: cluster count does not match params.a");
    }
    std::vector<Cluster> clusters;
    for (std::size_t c = 0; c < jclusters.size(); ++c) {
      Cluster cluster;
      cluster.centroid = vec(jclusters[c].at("centroid"));
      const auto& jsubs = jclusters[c].at("subclusters");
      if (jsubs.size() != static_cast<std::size_t>(params.subclusters)) {
        throw FormatError("space: subcluster count does not match params.b");
      }
      for (std::size_t s = 0; s < jsubs.size(); ++s) {
        Subcluster sub;
        sub.centroid = vec(jsubs[s].at("centroid"));
        for (const auto& jr : jsubs[s].at("records")) {
          auto rec = record_from_json(jr);
          if (rec.cluster_id != static_cast<int>(c) || rec.subcluster_id != static_cast<int>(s)) {
            throw FormatError("space: record '" + rec.id + "' stored under the wrong node");
          }
          if (rec.instruction_affordance.size() != dims || rec.tool_affordance.size() != dims) {
            throw DimensionError("space: record '" + rec.id + "' has the wrong dimension");
          }
          sub.records.push_back(std::move(rec));
        }
        cluster.subclusters.push_back(std::move(sub));
      }
      clusters.push_back(std::move(cluster));
    }
    RelationshipSpace space(params, std::move(clusters));
    if (space.record_count() != doc.at("record_count").get<std::size_t>()) {
      throw FormatError("space: record_count does not match the stored records");
    }
    return space;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("space: malformed document: ") + e.what());
  }
}

inline void save_space(const RelationshipSpace& space, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write space file: " + path);
  out << space_to_json(space).dump(1) << '\n';
  if (!out) throw Error("failed while writing space file: " + path);
}

inline RelationshipSpace load_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open space file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("space parse error in " + path + ": " + e.what());
  }
  return space_from_json(doc);
}

inline void save_drafts(std::span<const InstructionRecord> drafts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus file: " + path);
  for (const auto& d : drafts) out << record_to_json(d, false).dump() << '\n';
}

inline std::vector<InstructionRecord> load_drafts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus file: " + path);
  std::vector<InstructionRecord> drafts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      drafts.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return drafts;
}

}  // namespace aide
