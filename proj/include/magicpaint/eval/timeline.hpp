#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "magicpaint/core/png_io.hpp"
#include "magicpaint/core/recording.hpp"

namespace magicpaint {

inline constexpr double kPauseCapSeconds = 5.0;

// Per-action durations in seconds from consecutive timestamps; the first
// action's lead-in counts from t = 0. Gaps are capped at `cap_s` when
// `cap` is set.
inline std::vector<double> threshold_pauses(const Recording& rec, bool cap = true, double cap_s = kPauseCapSeconds) {
  std::vector<double> out;
  out.reserve(rec.actions.size());
  std::int64_t prev = 0;
  for (const auto& a : rec.actions) {
    if (a.t_ms < prev) throw Error("non-monotonic timestamps");
    const double gap = static_cast<double>(a.t_ms - prev) / 1000.0;
    out.push_back(cap ? std::min(cap_s, gap) : gap);
    prev = a.t_ms;
  }
  return out;
}

inline constexpr int kPropagationEvent = -1;

struct TimelineEvent {
  int pass = 1;
  int action_index = kPropagationEvent;  // index into the recording, or propagation
  bool executed = true;
  double duration_s = 0.0;
  double t_cum_s = 0.0;
  double sq = 0.0;
  double aiou = 0.0;

  bool is_propagation() const { return action_index == kPropagationEvent; }
  friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

struct Timeline {
  std::vector<TimelineEvent> events;

  double total_time() const { return events.empty() ? 0.0 : events.back().t_cum_s; }
  double final_sq() const { return events.empty() ? 0.0 : events.back().sq; }
  double final_aiou() const { return events.empty() ? 0.0 : events.back().aiou; }

  std::size_t executed_actions() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const auto& e) { return !e.is_propagation() && e.executed; }));
  }
  std::size_t propagations() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const auto& e) { return e.is_propagation(); }));
  }

  void recompute_cumulative() {
    double t = 0.0;
    for (auto& e : events) {
      t += e.duration_s;
      e.t_cum_s = t;
    }
  }

  friend bool operator==(const Timeline&, const Timeline&) = default;
};

struct LatencyModel {
  enum class Kind { BestCase, Fixed } kind = Kind::BestCase;
  double seconds = 0.0;

  static LatencyModel best_case() { return {}; }
  static LatencyModel fixed(double s) {
    if (!(s >= 0.0)) throw Error("latency must be >= 0");
    return {Kind::Fixed, s};
  }
  double cost() const { return kind == Kind::BestCase ? 0.0 : seconds; }
};

// "best" or "fixed:S" (S in seconds; "fixed" alone means 3 s).
inline LatencyModel parse_latency(std::string_view s) {
  if (s == "best" || s == "best_case") return LatencyModel::best_case();
  if (s == "fixed") return LatencyModel::fixed(3.0);
  if (s.starts_with("fixed:")) {
    const std::string num(s.substr(6));
    try {
      std::size_t used = 0;
      const double v = std::stod(num, &used);
      if (used == num.size()) return LatencyModel::fixed(v);
    } catch (const std::exception&) {
    }
  }
  throw Error("bad latency model: " + std::string(s));
}

inline std::string to_string(const LatencyModel& m) {
  if (m.kind == LatencyModel::Kind::BestCase) return "best";
  std::ostringstream os;
  os << "fixed:" << m.seconds;
  return os.str();
}

inline Timeline apply_latency_model(Timeline t, const LatencyModel& model) {
  for (auto& e : t.events)
    if (e.is_propagation()) e.duration_s = model.cost();
  t.recompute_cumulative();
  return t;
}

// Drops actions that do not raise aIoU above the best retained value by more
// than `eps`, together with the propagations that followed them, and
// re-accumulates time. Skipped (non-executed) events are dropped as well.
inline Timeline strip_redundant(const Timeline& t, double eps = 0.0) {
  Timeline out;
  double kept = 0.0;
  std::size_t i = 0;
  while (i < t.events.size()) {
    std::size_t j = i + 1;
    while (j < t.events.size() && t.events[j].is_propagation()) ++j;
    const auto& head = t.events[i];
    const double q = t.events[j - 1].aiou;
    const bool productive = (head.is_propagation() || head.executed) && q > kept + eps;
    if (productive) {
      out.events.insert(out.events.end(), t.events.begin() + static_cast<std::ptrdiff_t>(i),
                        t.events.begin() + static_cast<std::ptrdiff_t>(j));
      kept = q;
    }
    i = j;
  }
  out.recompute_cumulative();
  return out;
}

inline std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string timeline_csv(const Timeline& t) {
  std::string s = "pass,action_index,executed,t_cum_s,sq,aiou\n";
  for (const auto& e : t.events) {
    s += std::to_string(e.pass) + ',' + (e.is_propagation() ? std::string("propagation") : std::to_string(e.action_index)) +
         ',' + (e.executed ? '1' : '0') + ',' + format_number(e.t_cum_s) + ',' + format_number(e.sq) + ',' +
         format_number(e.aiou) + '\n';
  }
  return s;
}

inline Timeline parse_timeline_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "pass,action_index,executed,t_cum_s,sq,aiou")
    throw Error("bad timeline header");
  Timeline t;
  double prev = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw Error("bad timeline row: " + line);
    TimelineEvent e;
    try {
      e.pass = std::stoi(f[0]);
      e.action_index = f[1] == "propagation" ? kPropagationEvent : std::stoi(f[1]);
      e.executed = f[2] == "1";
      e.t_cum_s = std::stod(f[3]);
      e.sq = std::stod(f[4]);
      e.aiou = std::stod(f[5]);
    } catch (const std::exception&) {
      throw Error("bad timeline row: " + line);
    }
    e.duration_s = e.t_cum_s - prev;
    prev = e.t_cum_s;
    t.events.push_back(e);
  }
  return t;
}

struct CurvePoint {
  double t_s;
  double sq;
  double aiou;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct Curve {
  std::vector<CurvePoint> points;
};

// Averages piecewise-constant quality over images on the union of event
// times. Every image starts at (0, 0, 0) and holds its last value after its
// final event.
inline Curve build_curve(const std::vector<Timeline>& timelines) {
  if (timelines.empty()) throw Error("no timelines");
  std::vector<double> grid{0.0};
  for (const auto& t : timelines)
    for (const auto& e : t.events) grid.push_back(e.t_cum_s);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  Curve c;
  c.points.reserve(grid.size());
  std::vector<std::size_t> cursor(timelines.size(), 0);
  const double n = static_cast<double>(timelines.size());
  for (double t : grid) {
    double s = 0.0, a = 0.0;
    for (std::size_t i = 0; i < timelines.size(); ++i) {
      const auto& ev = timelines[i].events;
      while (cursor[i] < ev.size() && ev[cursor[i]].t_cum_s <= t) ++cursor[i];
      if (cursor[i] > 0) {
        s += ev[cursor[i] - 1].sq;
        a += ev[cursor[i] - 1].aiou;
      }
    }
    c.points.push_back({t, s / n, a / n});
  }
  return c;
}

inline std::string curve_csv(const Curve& c) {
  std::string s = "t_s,sq,aiou\n";
  for (const auto& p : c.points) s += format_number(p.t_s) + ',' + format_number(p.sq) + ',' + format_number(p.aiou) + '\n';
  return s;
}

}  // namespace magicpaint
