#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "aide/config.hpp"
#include "aide/errors.hpp"
#include "aide/perception.hpp"

namespace aide {

/// Perception backed by an HTTP service. Every capability is a JSON POST to
/// /detect, /similarity or /reason (the latter carries a "task" field).
/// Transport failures and non-2xx replies raise PerceptionError; after
/// `failure_threshold` consecutive failures the circuit opens and calls fail
/// fast with CircuitOpenError until `cooldown_ms` has passed. A 422 from
/// /reason means the reasoner had no answer and raises ReasonerError.
class RemotePerception : public Perception {
 public:
  explicit RemotePerception(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw ConfigError("remote perception needs a base URL");
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) token_ = key;
  }

  std::vector<Detection> detect(const SceneFrame& frame, std::span<const std::string> vocabulary, int k) override {
    if (k < 1) throw PerceptionError("detect: k must be at least 1");
    if (vocabulary.empty()) return {};
    nlohmann::json req{{"image", frame.image.uri},
                       {"width", frame.width},
                       {"height", frame.height},
                       {"timestamp_ms", frame.timestamp_ms},
                       {"vocabulary", std::vector<std::string>(vocabulary.begin(), vocabulary.end())},
                       {"k", k}};
    const auto body = post("/detect", req);
    std::vector<Detection> out;
    try {
      for (const auto& d : body.at("detections")) {
        const auto b = d.at("box").get<std::vector<std::int32_t>>();
        if (b.size() != 4) throw PerceptionError("detect: box needs four coordinates");
        Detection det;
        det.label = d.at("label").get<std::string>();
        det.box = clip_to_frame(Region{b[0], b[1], b[2], b[3]}, frame.width, frame.height);
        det.confidence = std::clamp(d.at("confidence").get<double>(), 0.0, 1.0);
        if (!det.box.valid()) continue;
        out.push_back(std::move(det));
      }
    } catch (const nlohmann::json::exception& e) {
      throw PerceptionError(std::string("detect: malformed reply: ") + e.what());
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
    if (out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
    return out;
  }

  SimilarityScore similarity(const MediaRef& a, const MediaRef& b) override {
    const auto body = post("/similarity", {{"a", a.uri}, {"b", b.uri}});
    return SimilarityScore(field<double>(body, "score"));
  }

  ToolHypothesis propose_tool(std::string_view instruction, const SceneFrame& frame) override {
    const auto body = reason("propose_tool", {{"instruction", instruction}, {"image", frame.image.uri}});
    ToolHypothesis h;
    h.label = field<std::string>(body, "label");
    if (h.label.empty()) throw ReasonerError("propose_tool: empty label");
    if (body.contains("attributes")) h.attributes = body.at("attributes").get<std::vector<std::string>>();
    return h;
  }

  std::size_t select_candidate(const ToolHypothesis& hypothesis, std::span<const Detection> candidates,
                               const SceneFrame& frame) override {
    if (candidates.size() <= 1) return 0;
    auto list = nlohmann::json::array();
    for (const auto& c : candidates)
      list.push_back({{"label", c.label}, {"box", box_json(c.box)}, {"confidence", c.confidence}, {"rank", c.rank}});
    const auto body = reason("select_candidate", {{"label", hypothesis.label},
                                                  {"attributes", hypothesis.attributes},
                                                  {"candidates", list},
                                                  {"image", frame.image.uri}});
    const auto idx = field<std::int64_t>(body, "index");
    return idx >= 0 && static_cast<std::size_t>(idx) < candidates.size() ? static_cast<std::size_t>(idx) : 0;
  }

  RegionPair segment_regions(const Detection& tool, const SceneFrame& frame) override {
    const auto body = reason("segment_regions", {{"label", tool.label}, {"box", box_json(tool.box)},
                                                 {"image", frame.image.uri}});
    try {
      const auto op = box_from(body.at("operational"));
      const auto fn = box_from(body.at("functional"));
      if (op && fn && tool.box.contains(*op) && tool.box.contains(*fn)) return {*op, *fn};
    } catch (const nlohmann::json::exception&) {
    }
    return split_regions(tool.box);
  }

  AffordanceVector score_affordance(const MediaRef& subject) override {
    const auto body = reason("score_affordance", {{"subject", subject.uri}});
    try {
      return AffordanceVector::clamped(body.at("scores").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      throw PerceptionError(std::string("score_affordance: malformed reply: ") + e.what());
    }
  }

  std::string infer_unseen_label(std::string_view instruction, const SceneFrame& frame) override {
    const auto body = reason("infer_unseen_label", {{"instruction", instruction}, {"image", frame.image.uri}});
    auto label = field<std::string>(body, "label");
    if (label.empty()) throw ReasonerError("infer_unseen_label: empty label");
    return label;
  }

  MediaRef crop(const SceneFrame& frame, const Region& box) override {
    return region_crop(frame.image, frame.to_parent(box), "crop");
  }

  bool circuit_open() const {
    std::lock_guard lock(mutex_);
    return open_locked(std::chrono::steady_clock::now());
  }

 private:
  static nlohmann::json box_json(const Region& r) { return {r.x_min, r.y_min, r.x_max, r.y_max}; }
  static std::optional<Region> box_from(const nlohmann::json& j) {
    const auto b = j.get<std::vector<std::int32_t>>();
    if (b.size() != 4) return std::nullopt;
    return Region{b[0], b[1], b[2], b[3]};
  }

  template <typename T>
  static T field(const nlohmann::json& body, const char* key) {
    try {
      return body.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw PerceptionError(std::string("malformed reply, field '") + key + "': " + e.what());
    }
  }

  nlohmann::json reason(const char* task, nlohmann::json payload) {
    payload["task"] = task;
    return post("/reason", payload);
  }

  bool open_locked(std::chrono::steady_clock::time_point now) const {
    return failures_ >= cfg_.failure_threshold && now < reopen_at_;
  }

  void record_failure() {
    std::lock_guard lock(mutex_);
    if (++failures_ >= cfg_.failure_threshold) {
      reopen_at_ = std::chrono::steady_clock::now() + std::chrono::milliseconds(cfg_.cooldown_ms);
    }
  }

  void record_success() {
    std::lock_guard lock(mutex_);
    failures_ = 0;
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& request) {
    {
      std::lock_guard lock(mutex_);
      if (open_locked(std::chrono::steady_clock::now())) {
        throw CircuitOpenError("circuit open after " + std::to_string(failures_) + " failures: " + cfg_.base_url);
      }
    }
    httplib::Client client(cfg_.base_url);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (!token_.empty()) client.set_bearer_token_auth(token_);

    const auto res = client.Post(path, request.dump(), "application/json");
    if (!res) {
      record_failure();
      throw PerceptionError(path + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 422 && path == "/reason") {
      record_success();
      throw ReasonerError("reasoner has no answer: " + res->body);
    }
    if (res->status < 200 || res->status >= 300) {
      record_failure();
      throw PerceptionError(path + ": HTTP " + std::to_string(res->status));
    }
    try {
      auto body = nlohmann::json::parse(res->body);
      record_success();
      return body;
    } catch (const nlohmann::json::parse_error& e) {
      record_failure();
      throw PerceptionError(path + ": reply is not JSON: " + e.what());
    }
  }

  RemoteConfig cfg_;
  std::string token_;
  mutable std::mutex mutex_;
  int failures_ = 0;
  std::chrono::steady_clock::time_point reopen_at_{};
};

}  // namespace aide
