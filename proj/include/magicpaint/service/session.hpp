#pragma once

// Transport-independent session API. `SessionApi::handle` maps a method,
// path and body to a status code and body; server.hpp binds it to HTTP.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magicpaint/core/png_io.hpp"
#include "magicpaint/core/recording.hpp"
#include "magicpaint/paint/state.hpp"
#include "magicpaint/propagate/assistant.hpp"

namespace magicpaint {

// Row-major run-length encoding: [[label, run], ...].
inline nlohmann::json rle_encode(const LabelMap& map) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [label, n] : label_runs(map)) out.push_back({label, n});
  return out;
}

inline LabelMap rle_decode(const nlohmann::json& rle, int width, int height) {
  std::vector<std::pair<LabelId, std::uint32_t>> runs;
  for (const auto& run : rle) runs.emplace_back(run.at(0).get<LabelId>(), run.at(1).get<std::uint32_t>());
  return map_from_runs(runs, width, height);
}

struct Session {
  std::string id;
  Image image;
  std::string image_name;
  AnnotationState state;
  Recording recording;
  std::shared_ptr<const Assistant> assistant;
  std::uint64_t revision = 0;
  std::chrono::steady_clock::time_point created;
  std::mutex writer;  // held for the duration of one action
  mutable std::shared_mutex data;  // guards the fields above during reads
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class SessionApi {
 public:
  using Clock = std::function<std::int64_t(const Session&)>;  // ms since session start

  explicit SessionApi(AssistantConfig defaults) : defaults_(std::move(defaults)) {
    clock_ = [](const Session& s) {
      return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - s.created)
          .count();
    };
  }

  void set_clock(Clock c) { clock_ = std::move(c); }

  // `query` carries URL parameters; `content_type` selects the body format.
  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body,
                     const std::string& content_type = "", const std::map<std::string, std::string>& query = {}) {
    try {
      const auto parts = split_path(path);
      if (parts.size() == 1 && parts[0] == "sessions" && method == "POST") return create(body, content_type, query);
      if (parts.size() >= 2 && parts[0] == "sessions") {
        auto s = find(parts[1]);
        if (!s) return error(404, "unknown session");
        if (parts.size() == 3 && parts[2] == "actions" && method == "POST") return post_action(*s, body);
        if (parts.size() == 3 && method == "GET") {
          if (parts[2] == "state") return state(*s);
          if (parts[2] == "recording") return recording(*s);
          if (parts[2] == "image") return image(*s);
        }
      }
      return error(404, "not found");
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

  std::size_t session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

 private:
  static std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path) {
      if (c == '/') {
        if (!cur.empty()) parts.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
  }

  static ApiResponse error(int status, const std::string& msg) {
    return {status, "application/json", nlohmann::json{{"error", msg}}.dump()};
  }

  static ApiResponse json(const nlohmann::json& j) { return {200, "application/json", j.dump()}; }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::shared_ptr<const Assistant> assistant_for(const AssistantConfig& cfg) {
    std::lock_guard lock(mutex_);
    const std::string key = std::string(to_string(cfg.inference)) + "|" +
                            (cfg.embedding.kind == EmbeddingKind::Histogram ? "hist" : "neural:" + cfg.embedding.weights.string());
    auto it = assistants_.find(key);
    if (it != assistants_.end()) return it->second;
    auto a = std::make_shared<const Assistant>(cfg);
    assistants_.emplace(key, a);
    return a;
  }

  // Body: PNG bytes (content type image/png; options from the query) or a
  // JSON object {"image": path, "embedding", "weights", "inference"}.
  ApiResponse create(const std::string& body, const std::string& content_type,
                     const std::map<std::string, std::string>& query) {
    AssistantConfig cfg = defaults_;
    Image img;
    std::string name;
    std::map<std::string, std::string> opts = query;
    try {
      if (content_type.starts_with("image/png")) {
        img = decode_image(std::span(reinterpret_cast<const unsigned char*>(body.data()), body.size()));
        name = opts.contains("name") ? opts["name"] : "upload.png";
      } else {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
          return error(400, "expected a PNG upload or a JSON object");
        }
        if (!j.is_object() || !j.contains("image")) return error(400, "missing image");
        for (const char* key : {"embedding", "weights", "inference"})
          if (j.contains(key)) opts[key] = j[key].get<std::string>();
        const std::filesystem::path path = j["image"].get<std::string>();
        img = load_image(path);
        name = path.filename().string();
      }
      if (opts.contains("embedding")) {
        if (opts["embedding"] == "hist")
          cfg.embedding.kind = EmbeddingKind::Histogram;
        else if (opts["embedding"] == "neural")
          cfg.embedding.kind = EmbeddingKind::Neural;
        else
          return error(400, "unknown embedding: " + opts["embedding"]);
      }
      if (opts.contains("weights")) cfg.embedding.weights = opts["weights"];
      if (opts.contains("inference")) cfg.inference = parse_inference(opts["inference"]);
      auto assistant = assistant_for(cfg);

      auto s = std::make_shared<Session>();
      s->image = std::move(img);
      s->image_name = name;
      s->state = AnnotationState(s->image.width(), s->image.height());
      s->recording.image = name;
      s->recording.width = s->image.width();
      s->recording.height = s->image.height();
      s->assistant = std::move(assistant);
      s->created = std::chrono::steady_clock::now();
      {
        std::lock_guard lock(mutex_);
        do s->id = new_id();
        while (sessions_.contains(s->id));
        sessions_.emplace(s->id, s);
      }
      return json({{"id", s->id}, {"width", s->image.width()}, {"height", s->image.height()}});
    } catch (const Error& e) {
      return error(400, e.what());
    }
  }

  std::string new_id() {
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 2; ++i) {
      std::uint64_t v = rng_();
      for (int k = 0; k < 16; ++k, v >>= 4) id += hex[v & 15];
    }
    return id;
  }

  ApiResponse post_action(Session& s, const std::string& body) {
    std::unique_lock writer(s.writer, std::try_to_lock);
    if (!writer.owns_lock()) return error(409, "another action is in progress for this session");

    RecordingAction a;
    try {
      a = parse_action(body);
      validate_action(a, s.image.width(), s.image.height());
    } catch (const Error& e) {
      return error(422, e.what());
    }
    a.t_ms = std::max(clock_(s), s.recording.actions.empty() ? std::int64_t{0} : s.recording.actions.back().t_ms);

    // work on a copy so a failed action leaves the session untouched
    AnnotationState next;
    {
      std::shared_lock read(s.data);
      next = s.state;
    }
    a.predicted.clear();
    if (a.reads_predicted() && next.predicted.count_nonzero() > 0) a.predicted = label_runs(next.predicted);
    std::optional<StateDelta> delta;
    try {
      delta = apply_action(next, a);
    } catch (const Error& e) {
      return error(422, e.what());
    }

    double prop_ms = 0.0;
    bool propagated = false;
    if (delta) {
      const auto t0 = std::chrono::steady_clock::now();
      if (next.reference.count_nonzero() == 0) {
        next.predicted = LabelMap(next.width(), next.height());
      } else {
        next.predicted = s.assistant->propagate(next, s.image);
        propagated = true;
      }
      prop_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }

    nlohmann::json changes = nlohmann::json::array();
    if (delta) {
      // net effect per pixel, in index order
      std::map<std::uint32_t, LabelId> net;
      for (const auto& c : delta->changes) net[c.index] = c.after;
      for (const auto& [k, after] : net) changes.push_back({k, after});
    }

    std::uint64_t revision;
    {
      std::unique_lock write(s.data);
      s.recording.actions.push_back(a);
      if (delta) {
        s.state = std::move(next);
        ++s.revision;
      }
      revision = s.revision;
    }
    std::shared_lock read(s.data);
    return json({{"revision", revision},
                 {"noop", !delta.has_value()},
                 {"t_ms", a.t_ms},
                 {"reference_delta", changes},
                 {"frozen", s.state.frozen},
                 {"predicted", rle_encode(s.state.predicted)},
                 {"propagated", propagated},
                 {"propagation_ms", prop_ms}});
  }

  ApiResponse state(const Session& s) const {
    std::shared_lock read(s.data);
    return json({{"id", s.id},
                 {"image", s.image_name},
                 {"width", s.image.width()},
                 {"height", s.image.height()},
                 {"revision", s.revision},
                 {"reference", rle_encode(s.state.reference)},
                 {"predicted", rle_encode(s.state.predicted)},
                 {"frozen", s.state.frozen}});
  }

  ApiResponse recording(const Session& s) const {
    std::shared_lock read(s.data);
    return {200, "text/plain", format_recording(s.recording)};
  }

  ApiResponse image(const Session& s) const {
    std::shared_lock read(s.data);
    const auto png = encode_image(s.image);
    return {200, "image/png", std::string(png.begin(), png.end())};
  }

  AssistantConfig defaults_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<const Assistant>> assistants_;
  std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace magicpaint
