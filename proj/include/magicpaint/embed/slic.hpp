#pragma once

// SLIC superpixels: k-means in (L, a, b, x, y) seeded on a regular grid,
// restricted to a 2S x 2S window per center, followed by a connectivity pass
// that absorbs small fragments into a neighboring segment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "magicpaint/core/types.hpp"

namespace magicpaint {

struct SlicParams {
  int n_segments = 400;
  double compactness = 10.0;
  int iterations = 10;
};

struct Lab {
  double l, a, b;
};

inline Lab rgb_to_lab(Rgb c) {
  auto lin = [](double u) {
    u /= 255.0;
    return u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4);
  };
  const double r = lin(c.r), g = lin(c.g), b = lin(c.b);
  double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  auto f = [](double t) { return t > 216.0 / 24389.0 ? std::cbrt(t) : (24389.0 / 27.0 * t + 16.0) / 116.0; };
  x = f(x), y = f(y), z = f(z);
  return {116.0 * y - 16.0, 500.0 * (x - y), 200.0 * (y - z)};
}

// Per-pixel superpixel id, dense from 0.
struct Superpixels {
  int width = 0;
  int height = 0;
  int count = 0;
  std::vector<std::int32_t> ids;
};

inline Superpixels slic_superpixels(const Image& img, const SlicParams& params) {
  if (params.n_segments < 1) throw Error("n_segments must be >= 1");
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = img.size();

  std::vector<Lab> lab(n);
  for (std::size_t k = 0; k < n; ++k) lab[k] = rgb_to_lab(img[k]);

  const double step = std::sqrt(static_cast<double>(n) / params.n_segments);
  const int nx = std::max(1, static_cast<int>(std::lround(w / step)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / step)));
  const double sx = static_cast<double>(w) / nx;
  const double sy = static_cast<double>(h) / ny;

  struct Center {
    double l, a, b, x, y;
  };
  std::vector<Center> centers;
  auto grad_at = [&](int x, int y) {
    if (x < 1 || y < 1 || x >= w - 1 || y >= h - 1) return std::numeric_limits<double>::infinity();
    auto d = [&](std::size_t p, std::size_t q) {
      const double dl = lab[p].l - lab[q].l, da = lab[p].a - lab[q].a, db = lab[p].b - lab[q].b;
      return dl * dl + da * da + db * db;
    };
    return d(img.index(x + 1, y), img.index(x - 1, y)) + d(img.index(x, y + 1), img.index(x, y - 1));
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int cx = std::min(w - 1, static_cast<int>((i + 0.5) * sx));
      int cy = std::min(h - 1, static_cast<int>((j + 0.5) * sy));
      // move the seed to the lowest-gradient pixel of its 3x3 neighborhood
      int bx = cx, by = cy;
      double best = grad_at(cx, cy);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double g = grad_at(cx + dx, cy + dy);
          if (g < best) best = g, bx = cx + dx, by = cy + dy;
        }
      const Lab c = lab[img.index(bx, by)];
      centers.push_back({c.l, c.a, c.b, static_cast<double>(bx), static_cast<double>(by)});
    }
  }

  const double s = std::max(sx, sy);
  const double spatial = (params.compactness / s) * (params.compactness / s);
  const int win = static_cast<int>(std::ceil(s));
  std::vector<std::int32_t> label(n, -1);
  std::vector<double> dist(n);
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const auto& ctr = centers[c];
      const int x0 = std::max(0, static_cast<int>(ctr.x) - win), x1 = std::min(w - 1, static_cast<int>(ctr.x) + win);
      const int y0 = std::max(0, static_cast<int>(ctr.y) - win), y1 = std::min(h - 1, static_cast<int>(ctr.y) + win);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const std::size_t k = img.index(x, y);
          const double dl = lab[k].l - ctr.l, da = lab[k].a - ctr.a, db = lab[k].b - ctr.b;
          const double dx = x - ctr.x, dy = y - ctr.y;
          const double d = dl * dl + da * da + db * db + spatial * (dx * dx + dy * dy);
          if (d < dist[k]) dist[k] = d, label[k] = static_cast<std::int32_t>(c);
        }
    }
    std::vector<std::array<double, 6>> acc(centers.size(), {0, 0, 0, 0, 0, 0});
    for (std::size_t k = 0; k < n; ++k) {
      if (label[k] < 0) continue;
      auto& a = acc[label[k]];
      a[0] += lab[k].l, a[1] += lab[k].a, a[2] += lab[k].b;
      a[3] += static_cast<double>(k % w), a[4] += static_cast<double>(k / w), a[5] += 1;
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (acc[c][5] > 0)
        centers[c] = {acc[c][0] / acc[c][5], acc[c][1] / acc[c][5], acc[c][2] / acc[c][5], acc[c][3] / acc[c][5],
                      acc[c][4] / acc[c][5]};
  }
  // window coverage guarantees every pixel is claimed, but keep it total
  for (auto& l : label)
    if (l < 0) l = 0;

  // Connectivity: relabel 4-connected fragments; fragments smaller than a
  // quarter of the nominal superpixel area join the previously visited
  // adjacent segment.
  Superpixels out{w, h, 0, std::vector<std::int32_t>(n, -1)};
  const std::size_t min_size = std::max<std::size_t>(1, static_cast<std::size_t>(sx * sy / 4.0));
  const int dxs[4] = {-1, 0, 1, 0};
  const int dys[4] = {0, -1, 0, 1};
  std::vector<std::size_t> members;
  int next = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (out.ids[start] >= 0) continue;
    const int sx0 = static_cast<int>(start % w), sy0 = static_cast<int>(start / w);
    int adjacent = -1;
    for (int i = 0; i < 4; ++i) {
      const int x = sx0 + dxs[i], y = sy0 + dys[i];
      if (x >= 0 && y >= 0 && x < w && y < h && out.ids[img.index(x, y)] >= 0) adjacent = out.ids[img.index(x, y)];
    }
    members.assign(1, start);
    out.ids[start] = next;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const int x = static_cast<int>(members[m] % w), y = static_cast<int>(members[m] / w);
      for (int i = 0; i < 4; ++i) {
        const int qx = x + dxs[i], qy = y + dys[i];
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
        const std::size_t q = img.index(qx, qy);
        if (out.ids[q] < 0 && label[q] == label[start]) {
          out.ids[q] = next;
          members.push_back(q);
        }
      }
    }
    if (members.size() < min_size && adjacent >= 0) {
      for (auto q : members) out.ids[q] = adjacent;
    } else {
      ++next;
    }
  }
  out.count = next;
  return out;
}

}  // namespace magicpaint
