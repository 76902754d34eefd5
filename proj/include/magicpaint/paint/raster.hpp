#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "magicpaint/core/types.hpp"

namespace magicpaint {

// Sorted (row-major), duplicate-free, in-bounds pixel coordinates.
class PixelSet {
 public:
  PixelSet() = default;
  explicit PixelSet(std::vector<Point> pts) : points_(std::move(pts)) {
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }
  const std::vector<Point>& points() const { return points_; }
  bool contains(Point p) const { return std::binary_search(points_.begin(), points_.end(), p); }

  friend bool operator==(const PixelSet&, const PixelSet&) = default;

 private:
  std::vector<Point> points_;
};

namespace detail {

// Marks pixels whose center lies within radius - 0.5 of segment ab.
// Integer arithmetic throughout: 4 * dist^2 <= (2r - 1)^2.
inline void stamp_segment(Point a, Point b, int radius, int width, int height, std::vector<std::uint8_t>& mask) {
  const std::int64_t lim = static_cast<std::int64_t>(2 * radius - 1) * (2 * radius - 1);
  const int x0 = std::max(0, std::min(a.x, b.x) - radius);
  const int x1 = std::min(width - 1, std::max(a.x, b.x) + radius);
  const int y0 = std::max(0, std::min(a.y, b.y) - radius);
  const int y1 = std::min(height - 1, std::max(a.y, b.y) + radius);
  const std::int64_t dx = b.x - a.x;
  const std::int64_t dy = b.y - a.y;
  const std::int64_t len2 = dx * dx + dy * dy;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const std::int64_t px = x - a.x;
      const std::int64_t py = y - a.y;
      const std::int64_t dot = px * dx + py * dy;
      bool inside;
      if (len2 == 0 || dot <= 0) {
        inside = 4 * (px * px + py * py) <= lim;
      } else if (dot >= len2) {
        const std::int64_t qx = x - b.x;
        const std::int64_t qy = y - b.y;
        inside = 4 * (qx * qx + qy * qy) <= lim;
      } else {
        const std::int64_t cross = px * dy - py * dx;
        inside = 4 * cross * cross <= lim * len2;
      }
      if (inside) mask[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
}

inline PixelSet mask_to_pixels(const std::vector<std::uint8_t>& mask, int width) {
  std::vector<Point> pts;
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k]) pts.push_back({static_cast<int>(k % width), static_cast<int>(k / width)});
  return PixelSet(std::move(pts));
}

}  // namespace detail

// Round brush swept along the polyline through `points`, clipped to the
// image. A pixel is covered when its center is within radius - 0.5 of the
// path, so radius 1 paints exactly the path pixels.
inline PixelSet rasterize_freeform(std::span<const Point> points, int radius, int width, int height) {
  if (points.empty()) throw Error("empty point list");
  if (radius < 1) throw Error("radius must be >= 1");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  if (points.size() == 1) {
    detail::stamp_segment(points[0], points[0], radius, width, height, mask);
  } else {
    for (std::size_t i = 1; i < points.size(); ++i)
      detail::stamp_segment(points[i - 1], points[i], radius, width, height, mask);
  }
  return detail::mask_to_pixels(mask, width);
}

// Same footprint as freeform; the two differ only in how the UI captures them.
inline PixelSet rasterize_polyline(std::span<const Point> points, int radius, int width, int height) {
  return rasterize_freeform(points, radius, width, height);
}

}  // namespace magicpaint
