#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "magicpaint/eval/metrics.hpp"
#include "magicpaint/eval/timeline.hpp"
#include "magicpaint/paint/state.hpp"
#include "magicpaint/propagate/assistant.hpp"

namespace magicpaint {

enum class SimOrder { Seq, Rnd };

inline const char* to_string(SimOrder o) { return o == SimOrder::Seq ? "seq" : "rnd"; }

inline SimOrder parse_order(std::string_view s) {
  if (s == "seq") return SimOrder::Seq;
  if (s == "rnd") return SimOrder::Rnd;
  throw Error("unknown order: " + std::string(s));
}

struct SimConfig {
  SimOrder order = SimOrder::Seq;
  std::uint64_t seed = 0;
  int max_passes = 10;
  double epsilon = 1e-6;
  AssistantConfig assistant;
  LatencyModel latency = LatencyModel::best_case();
  bool cap_pauses = true;

  void validate() const {
    if (max_passes < 1) throw Error("max_passes must be >= 1");
    if (!(epsilon >= 0.0)) throw Error("epsilon must be >= 0");
  }
};

struct Violation {
  std::size_t index;
  std::string reason;
  friend bool operator==(const Violation&, const Violation&) = default;
};

// Actions whose effect depends on the state they were recorded in.
inline std::vector<Violation> validate_for_simulation(const Recording& rec) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < rec.actions.size(); ++i) {
    const auto& a = rec.actions[i];
    if (a.is_stroke() && a.mode == StrokeMode::FreezeFg)
      out.push_back({i, "freeze_fg stroke"});
    else if (a.kind == ActionKind::FloodFill)
      out.push_back({i, "flood_fill"});
    else if (a.kind == ActionKind::Undo)
      out.push_back({i, "undo"});
    else if (a.kind == ActionKind::Redo)
      out.push_back({i, "redo"});
  }
  return out;
}

// Indices of the actions the simulator can replay independently: strokes in
// normal or erase mode. Flagged actions and class-freeze toggles are left out.
inline std::vector<std::size_t> simulatable_actions(const Recording& rec) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rec.actions.size(); ++i) {
    const auto& a = rec.actions[i];
    if (a.is_stroke() && a.mode != StrokeMode::FreezeFg) out.push_back(i);
  }
  return out;
}

struct ReplayResult {
  Timeline timeline;
  AnnotationState state;
};

// Applies every action in order without the assistant.
inline ReplayResult replay_manual(const Recording& rec, const GroundTruth& gt, bool cap_pauses = true) {
  validate_recording(rec);
  if (gt.segments.width() != rec.width || gt.segments.height() != rec.height)
    throw Error("ground truth does not match recording");
  const auto durations = threshold_pauses(rec, cap_pauses);
  ReplayResult r{{}, AnnotationState(rec.width, rec.height)};
  double t = 0.0;
  for (std::size_t i = 0; i < rec.actions.size(); ++i) {
    const auto& a = rec.actions[i];
    // the snapshot stands in for the assistant for this one action
    if (!a.predicted.empty()) r.state.predicted = map_from_runs(a.predicted, rec.width, rec.height);
    apply_action(r.state, a);
    if (!a.predicted.empty()) r.state.predicted = LabelMap(rec.width, rec.height);
    const Quality q = evaluate(r.state.displayed(), gt);
    t += durations[i];
    r.timeline.events.push_back({1, static_cast<int>(i), true, durations[i], t, q.sq, q.aiou});
  }
  return r;
}

// True iff applying the stroke (without re-propagating) does not raise aIoU
// of the displayed map by more than eps.
inline bool is_redundant(const RecordingAction& a, const AnnotationState& s, const GroundTruth& gt, double eps,
                         double current_aiou) {
  if (!a.is_stroke()) throw Error("redundancy is defined for strokes only");
  AnnotationState trial = s;
  apply_action(trial, a);
  return evaluate(trial.displayed(), gt).aiou <= current_aiou + eps;
}

inline bool is_redundant(const RecordingAction& a, const AnnotationState& s, const GroundTruth& gt, double eps) {
  return is_redundant(a, s, gt, eps, evaluate(s.displayed(), gt).aiou);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Fisher-Yates with a portable generator, so orderings match across
// standard libraries.
inline void shuffle_pass(std::vector<std::size_t>& v, std::uint64_t seed, int pass) {
  std::uint64_t state = splitmix64(seed) ^ splitmix64(0x5157000ULL + static_cast<std::uint64_t>(pass));
  for (std::size_t i = v.size(); i > 1; --i) {
    state = splitmix64(state);
    std::swap(v[i - 1], v[state % i]);
  }
}

}  // namespace detail

struct SimResult {
  Timeline timeline;
  AnnotationState state;
  int passes = 0;
};

// Multi-pass replay with the assistant: each pass walks the remaining actions
// (recorded order or a per-pass shuffle), skips redundant ones at no cost,
// executes the rest and propagates after each. Stops after a pass with no
// executed action or after max_passes.
inline SimResult simulate_assisted(const Recording& rec, const Image& img, const GroundTruth& gt,
                                   const SimConfig& cfg, const Assistant& assistant) {
  cfg.validate();
  validate_recording(rec);
  if (img.width() != rec.width || img.height() != rec.height) throw Error("image does not match recording");
  if (!gt.segments.same_shape(LabelMap(rec.width, rec.height))) throw Error("ground truth does not match recording");
  if (const auto v = validate_for_simulation(rec); !v.empty())
    throw Error("recording not simulatable: action " + std::to_string(v.front().index) + " is " + v.front().reason);

  const auto durations = threshold_pauses(rec, cfg.cap_pauses);
  SimResult r{{}, AnnotationState(rec.width, rec.height), 0};
  std::vector<std::size_t> remaining = simulatable_actions(rec);
  Quality current = evaluate(r.state.displayed(), gt);
  double t = 0.0;

  for (int pass = 1; pass <= cfg.max_passes && !remaining.empty(); ++pass) {
    r.passes = pass;
    std::vector<std::size_t> order = remaining;
    if (cfg.order == SimOrder::Rnd) detail::shuffle_pass(order, cfg.seed, pass);
    std::vector<std::size_t> left;
    std::size_t executed = 0;
    for (std::size_t idx : order) {
      const RecordingAction& a = rec.actions[idx];
      if (is_redundant(a, r.state, gt, cfg.epsilon, current.aiou)) {
        r.timeline.events.push_back({pass, static_cast<int>(idx), false, 0.0, t, current.sq, current.aiou});
        left.push_back(idx);
        continue;
      }
      apply_action(r.state, a);
      ++executed;
      current = evaluate(r.state.displayed(), gt);
      t += durations[idx];
      r.timeline.events.push_back({pass, static_cast<int>(idx), true, durations[idx], t, current.sq, current.aiou});

      if (r.state.reference.count_nonzero() == 0) {
        r.state.predicted = LabelMap(rec.width, rec.height);
      } else {
        try {
          r.state.predicted = assistant.propagate(r.state, img);
        } catch (const Error& e) {
          throw Error("propagation failed after action " + std::to_string(idx) + ": " + e.what());
        }
      }
      current = evaluate(r.state.displayed(), gt);
      t += cfg.latency.cost();
      r.timeline.events.push_back({pass, kPropagationEvent, true, cfg.latency.cost(), t, current.sq, current.aiou});
    }
    // keep recorded order for the next pass
    std::sort(left.begin(), left.end());
    remaining = std::move(left);
    if (executed == 0) break;
  }
  return r;
}

inline SimResult simulate_assisted(const Recording& rec, const Image& img, const GroundTruth& gt,
                                   const SimConfig& cfg) {
  return simulate_assisted(rec, img, gt, cfg, Assistant(cfg.assistant));
}

// Recording without the actions the simulator cannot replay. Timestamps are
// rebuilt so each kept action keeps its own gap and the removed actions'
// time disappears.
inline Recording strip_for_simulation(const Recording& rec) {
  Recording out = rec;
  out.actions.clear();
  std::int64_t t = 0;
  for (std::size_t i : simulatable_actions(rec)) {
    RecordingAction a = rec.actions[i];
    t += a.t_ms - (i == 0 ? 0 : rec.actions[i - 1].t_ms);
    a.t_ms = t;
    out.actions.push_back(std::move(a));
  }
  return out;
}

}  // namespace magicpaint
