#pragma once

// Line-delimited recording format. Line 1 is a header object, every further
// line one action:
//
//   {"version":1,"image":"img.png","width":W,"height":H,"labels":{"1":"sky"}}
//   {"t_ms":0,"kind":"stroke_freeform","mode":"normal","label":1,"radius":5,"points":[[x,y],...]}
//   {"t_ms":900,"kind":"flood_fill","label":2,"seed":[x,y]}
//   {"t_ms":1500,"kind":"freeze_class","label":2,"on":true}
//   {"t_ms":1700,"kind":"undo"}
//
// Fills and freeze_fg strokes read the predicted layer. When it was non-empty
// the action carries a run-length snapshot of it, "predicted":[[label,count],...],
// so the recording replays exactly without an assistant.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "magicpaint/core/png_io.hpp"
#include "magicpaint/core/types.hpp"

namespace magicpaint {

enum class ActionKind { StrokeFreeform, StrokeLine, FloodFill, FreezeClass, Undo, Redo };
enum class StrokeMode { Normal, FreezeFg, Erase };

inline std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::StrokeFreeform: return "stroke_freeform";
    case ActionKind::StrokeLine: return "stroke_line";
    case ActionKind::FloodFill: return "flood_fill";
    case ActionKind::FreezeClass: return "freeze_class";
    case ActionKind::Undo: return "undo";
    case ActionKind::Redo: return "redo";
  }
  return "?";
}

inline std::string_view to_string(StrokeMode m) {
  switch (m) {
    case StrokeMode::Normal: return "normal";
    case StrokeMode::FreezeFg: return "freeze_fg";
    case StrokeMode::Erase: return "erase";
  }
  return "?";
}

inline ActionKind parse_action_kind(std::string_view s) {
  for (auto k : {ActionKind::StrokeFreeform, ActionKind::StrokeLine, ActionKind::FloodFill,
                 ActionKind::FreezeClass, ActionKind::Undo, ActionKind::Redo})
    if (to_string(k) == s) return k;
  throw Error("unknown action kind: " + std::string(s));
}

inline StrokeMode parse_stroke_mode(std::string_view s) {
  for (auto m : {StrokeMode::Normal, StrokeMode::FreezeFg, StrokeMode::Erase})
    if (to_string(m) == s) return m;
  throw Error("unknown stroke mode: " + std::string(s));
}

struct RecordingAction {
  std::int64_t t_ms = 0;
  ActionKind kind = ActionKind::StrokeFreeform;
  StrokeMode mode = StrokeMode::Normal;
  LabelId label = 0;
  int radius = 1;
  std::vector<Point> points;
  Point seed;
  bool on = false;
  std::vector<std::pair<LabelId, std::uint32_t>> predicted;  // runs in row-major order; empty = none

  bool is_stroke() const { return kind == ActionKind::StrokeFreeform || kind == ActionKind::StrokeLine; }
  bool reads_predicted() const {
    return kind == ActionKind::FloodFill || (is_stroke() && mode == StrokeMode::FreezeFg);
  }

  friend bool operator==(const RecordingAction&, const RecordingAction&) = default;
};

inline std::vector<std::pair<LabelId, std::uint32_t>> label_runs(const LabelMap& map) {
  std::vector<std::pair<LabelId, std::uint32_t>> runs;
  for (LabelId v : map.labels()) {
    if (!runs.empty() && runs.back().first == v) {
      ++runs.back().second;
    } else {
      runs.emplace_back(v, 1);
    }
  }
  return runs;
}

inline LabelMap map_from_runs(const std::vector<std::pair<LabelId, std::uint32_t>>& runs, int width, int height) {
  LabelMap out(width, height);
  std::size_t k = 0;
  for (const auto& [label, n] : runs) {
    if (n == 0 || k + n > out.size()) throw Error("run-length data does not match the map size");
    for (std::uint32_t i = 0; i < n; ++i) out[k++] = label;
  }
  if (k != out.size()) throw Error("run-length data does not match the map size");
  return out;
}

struct Recording {
  int version = 1;
  std::string image;
  int width = 0;
  int height = 0;
  std::map<LabelId, std::string> labels;
  std::vector<RecordingAction> actions;

  friend bool operator==(const Recording&, const Recording&) = default;
};

inline constexpr int kRecordingVersion = 1;

// Checks one action against image bounds; does not look at timestamps.
inline void validate_action(const RecordingAction& a, int width, int height) {
  auto in_bounds = [&](Point p) { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; };
  if (a.t_ms < 0) throw Error("negative timestamp");
  if (!a.predicted.empty()) {
    if (!a.reads_predicted()) throw Error("predicted snapshot on an action that does not read it");
    std::size_t n = 0;
    for (const auto& [label, count] : a.predicted) n += count;
    if (n != static_cast<std::size_t>(width) * height) throw Error("predicted snapshot does not match the image size");
  }
  switch (a.kind) {
    case ActionKind::StrokeFreeform:
    case ActionKind::StrokeLine:
      if (a.points.empty()) throw Error("stroke has no points");
      if (a.radius < 1) throw Error("stroke radius must be >= 1");
      if (a.mode != StrokeMode::Erase && a.label == kUnlabeled) throw Error("label 0 is reserved");
      for (Point p : a.points)
        if (!in_bounds(p)) throw Error("coordinate out of bounds");
      break;
    case ActionKind::FloodFill:
      if (a.label == kUnlabeled) throw Error("label 0 is reserved");
      if (!in_bounds(a.seed)) throw Error("coordinate out of bounds");
      break;
    case ActionKind::FreezeClass:
      if (a.label == kUnlabeled) throw Error("label 0 is reserved");
      break;
    case ActionKind::Undo:
    case ActionKind::Redo:
      break;
  }
}

inline void validate_recording(const Recording& rec) {
  if (rec.version != kRecordingVersion) throw Error("version mismatch");
  if (rec.width < 1 || rec.height < 1) throw Error("recording dimensions must be positive");
  std::int64_t last = 0;
  for (const auto& a : rec.actions) {
    validate_action(a, rec.width, rec.height);
    if (a.t_ms < last) throw Error("non-monotonic timestamps");
    last = a.t_ms;
  }
}

inline nlohmann::ordered_json action_to_json(const RecordingAction& a) {
  nlohmann::ordered_json j;
  j["t_ms"] = a.t_ms;
  j["kind"] = std::string(to_string(a.kind));
  switch (a.kind) {
    case ActionKind::StrokeFreeform:
    case ActionKind::StrokeLine: {
      j["mode"] = std::string(to_string(a.mode));
      j["label"] = a.label;
      j["radius"] = a.radius;
      auto pts = nlohmann::ordered_json::array();
      for (Point p : a.points) pts.push_back({p.x, p.y});
      j["points"] = std::move(pts);
      break;
    }
    case ActionKind::FloodFill:
      j["label"] = a.label;
      j["seed"] = {a.seed.x, a.seed.y};
      break;
    case ActionKind::FreezeClass:
      j["label"] = a.label;
      j["on"] = a.on;
      break;
    case ActionKind::Undo:
    case ActionKind::Redo:
      break;
  }
  if (!a.predicted.empty()) {
    auto runs = nlohmann::ordered_json::array();
    for (const auto& [label, n] : a.predicted) runs.push_back({label, n});
    j["predicted"] = std::move(runs);
  }
  return j;
}

// Parses one action object; shape errors become magicpaint::Error.
inline RecordingAction action_from_json(const nlohmann::json& j) {
  RecordingAction a;
  try {
    a.t_ms = j.value("t_ms", std::int64_t{0});
    a.kind = parse_action_kind(j.at("kind").get<std::string>());
    auto point = [](const nlohmann::json& p) {
      if (!p.is_array() || p.size() != 2) throw Error("point must be [x,y]");
      return Point{p[0].get<int>(), p[1].get<int>()};
    };
    switch (a.kind) {
      case ActionKind::StrokeFreeform:
      case ActionKind::StrokeLine:
        a.mode = parse_stroke_mode(j.value("mode", std::string("normal")));
        a.label = j.value("label", LabelId{0});
        a.radius = j.at("radius").get<int>();
        for (const auto& p : j.at("points")) a.points.push_back(point(p));
        break;
      case ActionKind::FloodFill:
        a.label = j.at("label").get<LabelId>();
        a.seed = point(j.at("seed"));
        break;
      case ActionKind::FreezeClass:
        a.label = j.at("label").get<LabelId>();
        a.on = j.at("on").get<bool>();
        break;
      case ActionKind::Undo:
      case ActionKind::Redo:
        break;
    }
    if (j.contains("predicted"))
      for (const auto& run : j.at("predicted")) {
        if (!run.is_array() || run.size() != 2) throw Error("run must be [label,count]");
        a.predicted.emplace_back(run[0].get<LabelId>(), run[1].get<std::uint32_t>());
      }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed action: ") + e.what());
  }
  return a;
}

inline std::string format_action(const RecordingAction& a) { return action_to_json(a).dump(); }

inline RecordingAction parse_action(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed action: ") + e.what());
  }
  return action_from_json(j);
}

inline std::string format_recording(const Recording& rec) {
  nlohmann::ordered_json header;
  header["version"] = rec.version;
  header["image"] = rec.image;
  header["width"] = rec.width;
  header["height"] = rec.height;
  header["labels"] = nlohmann::ordered_json::object();
  for (const auto& [id, name] : rec.labels) header["labels"][std::to_string(id)] = name;
  std::string out = header.dump() + "\n";
  for (const auto& a : rec.actions) out += format_action(a) + "\n";
  return out;
}

inline Recording parse_recording(std::string_view text) {
  Recording rec;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error("empty recording");
  try {
    auto h = nlohmann::json::parse(line);
    rec.version = h.at("version").get<int>();
    if (rec.version != kRecordingVersion) throw Error("version mismatch");
    rec.image = h.at("image").get<std::string>();
    rec.width = h.at("width").get<int>();
    rec.height = h.at("height").get<int>();
    if (h.contains("labels"))
      for (const auto& [id, name] : h["labels"].items())
        rec.labels[static_cast<LabelId>(std::stoul(id))] = name.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed recording header: ") + e.what());
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rec.actions.push_back(parse_action(line));
  }
  validate_recording(rec);
  return rec;
}

inline Recording read_recording(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open recording: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_recording(ss.str());
}

inline void write_recording(const Recording& rec, const std::filesystem::path& path) {
  validate_recording(rec);
  const std::string text = format_recording(rec);
  write_file_bytes(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

}  // namespace magicpaint
