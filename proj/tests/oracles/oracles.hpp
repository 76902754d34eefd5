#pragma once

// Slow, independent re-implementations used as test oracles. Nothing here
// shares code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "magicpaint/core/types.hpp"
#include "magicpaint/embed/field.hpp"
#include "magicpaint/propagate/densecrf.hpp"

namespace oracle {

using namespace magicpaint;

// Floating-point distance from (px, py) to segment ab.
inline double segment_distance(double px, double py, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 == 0.0 ? 0.0 : ((px - a.x) * dx + (py - a.y) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (a.x + t * dx), py - (a.y + t * dy));
}

// Pixels whose center is within radius - 0.5 of the polyline.
inline std::vector<Point> capsule_pixels(const std::vector<Point>& pts, int radius, int w, int h) {
  std::vector<Point> out;
  const double lim = radius - 0.5;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double d = std::numeric_limits<double>::infinity();
      if (pts.size() == 1) d = segment_distance(x, y, pts[0], pts[0]);
      for (std::size_t i = 1; i < pts.size(); ++i) d = std::min(d, segment_distance(x, y, pts[i - 1], pts[i]));
      if (d <= lim + 1e-9) out.push_back({x, y});
    }
  std::sort(out.begin(), out.end());
  return out;
}

// Connected components by union-find over 4-neighbors; returns a root per pixel.
inline std::vector<std::size_t> union_find_components(const LabelMap& m) {
  std::vector<std::size_t> parent(m.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t k) {
    while (parent[k] != k) k = parent[k] = parent[parent[k]];
    return k;
  };
  const int w = m.width(), h = m.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t k = m.index(x, y);
      if (x + 1 < w && m[k] == m[k + 1]) parent[find(k)] = find(k + 1);
      if (y + 1 < h && m[k] == m[k + w]) parent[find(k)] = find(k + w);
    }
  std::vector<std::size_t> root(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) root[k] = find(k);
  return root;
}

// Distance map of one label straight from the definition: minimum squared
// distance to any pixel carrying the label.
inline std::vector<double> distance_map(const EmbeddingField& f, const LabelMap& ref, LabelId label) {
  std::vector<double> out(f.pixels(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < f.pixels(); ++k)
    for (std::size_t j = 0; j < f.pixels(); ++j) {
      if (ref[j] != label) continue;
      double d = 0.0;
      for (int c = 0; c < f.dim(); ++c) {
        const double diff = static_cast<double>(f.at(k)[c]) - f.at(j)[c];
        d += diff * diff;
      }
      out[k] = std::min(out[k], d);
    }
  return out;
}

// out_i = sum over j of exp(-|f_i - f_j|^2) v_j, self included.
inline std::vector<double> gauss_sum(const std::vector<double>& f, int fdim, const std::vector<double>& v, int vdim) {
  const std::size_t n = f.size() / fdim;
  std::vector<double> out(n * vdim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d = 0.0;
      for (int c = 0; c < fdim; ++c) d += (f[i * fdim + c] - f[j * fdim + c]) * (f[i * fdim + c] - f[j * fdim + c]);
      const double wgt = std::exp(-d);
      for (int c = 0; c < vdim; ++c) out[i * vdim + c] += wgt * v[j * vdim + c];
    }
  return out;
}

// Mean field with explicit N x N kernel matrices built from pixel positions
// and colors.
inline std::vector<double> mean_field(const std::vector<double>& unary, std::size_t slots, const Image& img,
                                      const CrfParams& p) {
  const std::size_t n = img.size();
  const int w = img.width();
  std::vector<double> ks(n * n), ka(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = static_cast<double>(i % w) - static_cast<double>(j % w);
      const double dy = static_cast<double>(i / w) - static_cast<double>(j / w);
      const double dr = img[i].r - img[j].r, dg = img[i].g - img[j].g, db = img[i].b - img[j].b;
      const double pos = dx * dx + dy * dy;
      ks[i * n + j] = std::exp(-pos / p.theta_gamma);
      ka[i * n + j] = std::exp(-pos / p.theta_alpha - (dr * dr + dg * dg + db * db) / p.theta_beta);
    }
  auto softmax_row = [&](const double* logit, double* out) {
    const double mx = *std::max_element(logit, logit + slots);
    double z = 0.0;
    for (std::size_t s = 0; s < slots; ++s) z += std::exp(logit[s] - mx);
    for (std::size_t s = 0; s < slots; ++s) out[s] = std::exp(logit[s] - mx) / z;
  };
  std::vector<double> q(n * slots), logit(n * slots);
  for (std::size_t i = 0; i < logit.size(); ++i) logit[i] = -unary[i];
  for (std::size_t i = 0; i < n; ++i) softmax_row(&logit[i * slots], &q[i * slots]);
  for (int it = 0; it < p.iterations; ++it) {
    std::vector<double> next(q.size());
    for (std::size_t i = 0; i < n; ++i) {
      double zs = 0.0, za = 0.0;
      for (std::size_t j = 0; j < n; ++j) zs += ks[i * n + j], za += ka[i * n + j];
      std::vector<double> l(slots);
      for (std::size_t s = 0; s < slots; ++s) {
        double ms = 0.0, ma = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          ms += ks[i * n + j] * q[j * slots + s];
          ma += ka[i * n + j] * q[j * slots + s];
        }
        l[s] = -unary[i * slots + s] + ms / zs + (p.alpha > 0.0 ? p.alpha * ma / za : 0.0);
      }
      softmax_row(l.data(), &next[i * slots]);
    }
    q = std::move(next);
  }
  return q;
}

}  // namespace oracle
