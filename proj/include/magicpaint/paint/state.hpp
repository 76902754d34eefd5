#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "magicpaint/core/recording.hpp"
#include "magicpaint/core/types.hpp"
#include "magicpaint/paint/raster.hpp"

namespace magicpaint {

struct PixelChange {
  std::uint32_t index;
  LabelId before;
  LabelId after;
  friend bool operator==(const PixelChange&, const PixelChange&) = default;
};

struct FrozenChange {
  LabelId label;
  bool now_on;
  friend bool operator==(const FrozenChange&, const FrozenChange&) = default;
};

// One reversible primitive. Only the reference layer and the frozen set are
// recorded; the predicted layer belongs to the assistant.
struct StateDelta {
  std::vector<PixelChange> changes;
  std::vector<FrozenChange> frozen;
  std::size_t promoted = 0;

  bool empty() const { return changes.empty() && frozen.empty(); }

  StateDelta inverse() const {
    StateDelta inv;
    inv.changes.reserve(changes.size());
    for (auto it = changes.rbegin(); it != changes.rend(); ++it)
      inv.changes.push_back({it->index, it->after, it->before});
    for (auto it = frozen.rbegin(); it != frozen.rend(); ++it) inv.frozen.push_back({it->label, !it->now_on});
    return inv;
  }
};

class AnnotationState {
 public:
  AnnotationState() = default;
  AnnotationState(int width, int height) : reference(width, height), predicted(width, height) {}

  LabelMap reference;
  LabelMap predicted;
  std::set<LabelId> frozen;
  std::vector<StateDelta> history;
  std::vector<StateDelta> redo_stack;

  int width() const { return reference.width(); }
  int height() const { return reference.height(); }

  LabelId displayed_at(std::size_t k) const { return reference[k] != kUnlabeled ? reference[k] : predicted[k]; }

  // Composite the user sees: reference wins over predicted.
  LabelMap displayed() const {
    LabelMap out = reference;
    for (std::size_t k = 0; k < out.size(); ++k)
      if (out[k] == kUnlabeled) out[k] = predicted[k];
    return out;
  }

  std::set<LabelId> reference_labels() const {
    std::vector<bool> seen(65536, false);
    std::set<LabelId> out;
    for (LabelId l : reference.labels())
      if (l != kUnlabeled && !seen[l]) seen[l] = true, out.insert(l);
    return out;
  }
};

namespace detail {

inline void apply_delta(AnnotationState& s, const StateDelta& d) {
  for (const auto& c : d.changes) s.reference[c.index] = c.after;
  for (const auto& f : d.frozen) {
    if (f.now_on)
      s.frozen.insert(f.label);
    else
      s.frozen.erase(f.label);
  }
}

// Keeps frozen a subset of the labels still present in the reference layer.
inline void drop_vanished_frozen(AnnotationState& s, StateDelta& d) {
  if (s.frozen.empty()) return;
  const auto present = s.reference_labels();
  for (auto it = s.frozen.begin(); it != s.frozen.end();) {
    if (!present.contains(*it)) {
      d.frozen.push_back({*it, false});
      it = s.frozen.erase(it);
    } else {
      ++it;
    }
  }
}

inline void commit(AnnotationState& s, StateDelta& d) {
  drop_vanished_frozen(s, d);
  s.history.push_back(d);
  s.redo_stack.clear();
}

}  // namespace detail

// Paints `pixels` into the reference layer.
//   normal    - overwrite with `label`
//   erase     - clear to 0
//   freeze_fg - keep existing reference pixels, promote predicted ones,
//               label the remaining background with `label`
inline StateDelta apply_stroke(AnnotationState& s, const PixelSet& pixels, LabelId label, StrokeMode mode) {
  if (mode != StrokeMode::Erase && label == kUnlabeled) throw Error("label 0 is reserved");
  for (Point p : pixels)
    if (!s.reference.contains(p.x, p.y)) throw Error("coordinate out of bounds");
  StateDelta d;
  for (Point p : pixels) {
    const auto k = static_cast<std::uint32_t>(s.reference.index(p.x, p.y));
    const LabelId before = s.reference[k];
    LabelId after = before;
    switch (mode) {
      case StrokeMode::Normal:
        after = label;
        break;
      case StrokeMode::Erase:
        after = kUnlabeled;
        break;
      case StrokeMode::FreezeFg:
        if (before != kUnlabeled) break;
        if (s.predicted[k] != kUnlabeled) {
          after = s.predicted[k];
          ++d.promoted;
        } else {
          after = label;
        }
        break;
    }
    if (after != before) {
      s.reference[k] = after;
      d.changes.push_back({k, before, after});
    }
  }
  detail::commit(s, d);
  return d;
}

// Fills the 4-connected region of the displayed map around `seed`. A region
// that is only predicted becomes reference even when its label is unchanged.
inline StateDelta flood_fill(AnnotationState& s, Point seed, LabelId label) {
  if (!s.reference.contains(seed.x, seed.y)) throw Error("coordinate out of bounds");
  if (label == kUnlabeled) throw Error("label 0 is reserved");
  const int w = s.width();
  const int h = s.height();
  const std::size_t start = s.reference.index(seed.x, seed.y);
  const LabelId value = s.displayed_at(start);
  std::vector<std::uint8_t> visited(s.reference.size(), 0);
  std::vector<std::size_t> stack{start};
  visited[start] = 1;
  StateDelta d;
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    const LabelId before = s.reference[k];
    if (before == kUnlabeled && s.predicted[k] != kUnlabeled) ++d.promoted;
    if (before != label) d.changes.push_back({static_cast<std::uint32_t>(k), before, label});
    const int x = static_cast<int>(k % w);
    const int y = static_cast<int>(k / w);
    const int nbr[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
    for (const auto& n : nbr) {
      if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
      const std::size_t q = static_cast<std::size_t>(n[1]) * w + n[0];
      if (!visited[q] && s.displayed_at(q) == value) {
        visited[q] = 1;
        stack.push_back(q);
      }
    }
  }
  std::sort(d.changes.begin(), d.changes.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  for (const auto& c : d.changes) s.reference[c.index] = c.after;
  detail::commit(s, d);
  return d;
}

inline StateDelta set_frozen(AnnotationState& s, LabelId label, bool on) {
  if (label == kUnlabeled) throw Error("label 0 is reserved");
  StateDelta d;
  if (on) {
    if (!s.reference_labels().contains(label)) throw Error("cannot freeze a label absent from the reference layer");
    if (s.frozen.insert(label).second) d.frozen.push_back({label, true});
  } else if (s.frozen.erase(label) > 0) {
    d.frozen.push_back({label, false});
  }
  s.history.push_back(d);
  s.redo_stack.clear();
  return d;
}

// nullopt signals an empty stack.
inline std::optional<StateDelta> undo(AnnotationState& s) {
  if (s.history.empty()) return std::nullopt;
  StateDelta d = std::move(s.history.back());
  s.history.pop_back();
  StateDelta inv = d.inverse();
  detail::apply_delta(s, inv);
  s.redo_stack.push_back(std::move(d));
  return inv;
}

inline std::optional<StateDelta> redo(AnnotationState& s) {
  if (s.redo_stack.empty()) return std::nullopt;
  StateDelta d = std::move(s.redo_stack.back());
  s.redo_stack.pop_back();
  detail::apply_delta(s, d);
  s.history.push_back(d);
  return d;
}

inline PixelSet stroke_footprint(const RecordingAction& a, int width, int height) {
  return a.kind == ActionKind::StrokeLine ? rasterize_polyline(a.points, a.radius, width, height)
                                          : rasterize_freeform(a.points, a.radius, width, height);
}

// Applies one recorded primitive. Returns nullopt for undo/redo on an empty stack.
inline std::optional<StateDelta> apply_action(AnnotationState& s, const RecordingAction& a) {
  validate_action(a, s.width(), s.height());
  switch (a.kind) {
    case ActionKind::StrokeFreeform:
    case ActionKind::StrokeLine:
      return apply_stroke(s, stroke_footprint(a, s.width(), s.height()), a.label, a.mode);
    case ActionKind::FloodFill:
      return flood_fill(s, a.seed, a.label);
    case ActionKind::FreezeClass:
      return set_frozen(s, a.label, a.on);
    case ActionKind::Undo:
      return undo(s);
    case ActionKind::Redo:
      return redo(s);
  }
  return std::nullopt;
}

}  // namespace magicpaint
