#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "magicpaint/core/types.hpp"
#include "magicpaint/paint/raster.hpp"

namespace magicpaint {

inline double segment_iou(const PixelSet& a, const PixelSet& b) {
  if (a.empty() && b.empty()) throw Error("IoU of two empty sets");
  std::size_t inter = 0;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib)
      ++ia;
    else if (*ib < *ia)
      ++ib;
    else
      ++inter, ++ia, ++ib;
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

struct MatchedPair {
  LabelId label;    // annotated label
  LabelId segment;  // gt segment id
  double iou;
  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct SegmentMatch {
  std::vector<MatchedPair> pairs;  // ordered by gt segment id
  std::size_t unmatched_gt = 0;
  std::size_t unmatched_annotated = 0;
  std::size_t gt_segments = 0;
};

// Areas and intersections of annotated labels and gt segments, restricted to
// non-void gt pixels.
struct Overlaps {
  std::map<LabelId, std::size_t> label_area;
  std::map<LabelId, std::size_t> segment_area;
  std::map<std::pair<LabelId, LabelId>, std::size_t> intersection;  // (label, segment)

  void add(LabelId label, LabelId segment) {
    if (segment == kUnlabeled) return;
    ++segment_area[segment];
    if (label == kUnlabeled) return;
    ++label_area[label];
    ++intersection[{label, segment}];
  }

  double iou(LabelId label, LabelId segment) const {
    auto it = intersection.find({label, segment});
    if (it == intersection.end()) return 0.0;
    const double inter = static_cast<double>(it->second);
    return inter / (static_cast<double>(label_area.at(label) + segment_area.at(segment)) - inter);
  }
};

inline Overlaps overlaps(const LabelMap& annotated, const LabelMap& segments) {
  if (!annotated.same_shape(segments)) throw Error("annotation does not match ground truth");
  Overlaps o;
  for (std::size_t k = 0; k < annotated.size(); ++k) o.add(annotated[k], segments[k]);
  return o;
}

inline Overlaps overlaps(const std::map<LabelId, PixelSet>& annotated, const LabelMap& segments) {
  Overlaps o;
  for (LabelId s : segments.labels())
    if (s != kUnlabeled) ++o.segment_area[s];
  for (const auto& [label, set] : annotated) {
    if (label == kUnlabeled) continue;
    for (Point p : set) {
      if (!segments.contains(p.x, p.y)) throw Error("annotated pixel outside ground truth");
      const LabelId s = segments.at(p.x, p.y);
      if (s == kUnlabeled) continue;
      ++o.label_area[label];
      ++o.intersection[{label, s}];
    }
  }
  return o;
}

// Binding present: each annotated label is paired with its bound segment.
// Otherwise greedy by IoU, ties to the lower segment id then the lower label.
// Pairs need IoU > 0.
inline SegmentMatch match_segments(const Overlaps& o, const GroundTruth& gt) {
  SegmentMatch m;
  m.gt_segments = o.segment_area.size();
  std::vector<std::tuple<double, LabelId, LabelId>> cand;  // (iou, segment, label)
  if (gt.label_binding) {
    std::map<LabelId, bool> seg_used;
    for (const auto& [label, area] : o.label_area) {
      auto it = gt.label_binding->find(label);
      if (it == gt.label_binding->end()) continue;
      const double iou = o.iou(label, it->second);
      if (iou > 0.0 && !seg_used[it->second]) {
        seg_used[it->second] = true;
        cand.emplace_back(iou, it->second, label);
      }
    }
  } else {
    std::vector<std::tuple<double, LabelId, LabelId>> all;
    for (const auto& [key, inter] : o.intersection) all.emplace_back(o.iou(key.first, key.second), key.second, key.first);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
      return std::get<2>(a) < std::get<2>(b);
    });
    std::map<LabelId, bool> label_used, seg_used;
    for (const auto& c : all) {
      const auto [iou, seg, label] = c;
      if (iou <= 0.0 || label_used[label] || seg_used[seg]) continue;
      label_used[label] = seg_used[seg] = true;
      cand.push_back(c);
    }
  }
  for (const auto& [iou, seg, label] : cand) m.pairs.push_back({label, seg, iou});
  std::sort(m.pairs.begin(), m.pairs.end(), [](const auto& a, const auto& b) { return a.segment < b.segment; });
  m.unmatched_gt = m.gt_segments - m.pairs.size();
  m.unmatched_annotated = o.label_area.size() - m.pairs.size();
  return m;
}

inline SegmentMatch match_segments(const LabelMap& annotated, const GroundTruth& gt) {
  return match_segments(overlaps(annotated, gt.segments), gt);
}

inline SegmentMatch match_segments(const std::map<LabelId, PixelSet>& annotated, const GroundTruth& gt) {
  return match_segments(overlaps(annotated, gt.segments), gt);
}

// Mean IoU over matched pairs; 0 without matches.
inline double sq(const SegmentMatch& m) {
  if (m.pairs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : m.pairs) s += p.iou;
  return s / static_cast<double>(m.pairs.size());
}

inline double aiou(const SegmentMatch& m, std::size_t n_gt) {
  if (n_gt == 0) throw Error("aIoU needs at least one ground-truth segment");
  double s = 0.0;
  for (const auto& p : m.pairs) s += p.iou;
  return s / static_cast<double>(n_gt);
}

struct Quality {
  double sq = 0.0;
  double aiou = 0.0;
  friend bool operator==(const Quality&, const Quality&) = default;
};

inline Quality evaluate(const LabelMap& annotated, const GroundTruth& gt) {
  const SegmentMatch m = match_segments(annotated, gt);
  return {sq(m), aiou(m, m.gt_segments)};
}

}  // namespace magicpaint
