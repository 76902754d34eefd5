#pragma once

// Fully connected CRF over pixels with Potts compatibility and the kernel
//   k(i, j) = exp(-|p_i - p_j|^2 / theta_gamma)
//           + alpha * exp(-|p_i - p_j|^2 / theta_alpha - |I_i - I_j|^2 / theta_beta),
// solved by parallel mean-field updates. Messages are kernel-normalized:
//   m_i(l) = sum_j k(i, j) Q_j(l) / sum_j k(i, j)   (j ranges over all pixels, i included)
// so unaries on the scale of embedding distances stay comparable to the
// pairwise term regardless of image size.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "magicpaint/core/types.hpp"
#include "magicpaint/propagate/distance_maps.hpp"
#include "magicpaint/propagate/gauss_tree.hpp"
#include "magicpaint/propagate/gaussian_filter.hpp"

namespace magicpaint {

struct CrfParams {
  double alpha = 5.0;
  double theta_gamma = 3.0 * 3.0;
  double theta_alpha = 60.0 * 60.0;
  double theta_beta = 3.0 * 13.0 * 13.0;
  int iterations = 5;
  double unary_scale = 1.0;

  void validate() const {
    if (!(theta_gamma > 0.0) || !(theta_alpha > 0.0) || !(theta_beta > 0.0))
      throw Error("crf bandwidths must be > 0");
    if (!(alpha >= 0.0)) throw Error("crf alpha must be >= 0");
    if (iterations < 1) throw Error("crf iterations must be >= 1");
    if (!(unary_scale >= 0.0)) throw Error("unary scale must be >= 0");
  }

  friend bool operator==(const CrfParams&, const CrfParams&) = default;
};

enum class FilterMethod {
  Fast,        // separable grid convolution for smoothness, kd-tree Gauss transform for appearance
  Lattice,     // permutohedral lattice for both kernels; cheapest, accurate to a few percent
  BruteForce,  // exact O(n^2) sums, small images only
  Auto         // Fast up to kFastFilterMaxPixels, Lattice beyond
};

// The kd-tree appearance filter is roughly quadratic on images with large
// uniform regions; past this size Auto switches to the lattice.
inline constexpr std::size_t kFastFilterMaxPixels = 96 * 96;

// Tolerance of the kd-tree appearance filter (normalized error about twice this).
inline constexpr double kAppearanceTolerance = 1e-5;

struct CrfResult {
  LabelMap labels;
  std::vector<double> marginals;   // pixels x slots, slot order of the distance maps
  std::vector<double> max_change;  // per iteration, max |Q_new - Q_old|
  std::size_t slots = 0;
};

// Exact Gaussian blur over the pixel grid, excluding nothing (self weight 1):
// out(x, y) = sum_{x', y'} exp(-((x - x')^2 + (y - y')^2) / theta) v(x', y').
// Taps beyond exp(-30) are dropped.
class SeparableGridFilter {
 public:
  SeparableGridFilter(int width, int height, double theta) : width_(width), height_(height) {
    const int radius = std::max(1, static_cast<int>(std::ceil(std::sqrt(30.0 * theta))));
    taps_.resize(static_cast<std::size_t>(radius) + 1);
    for (int r = 0; r <= radius; ++r) taps_[r] = std::exp(-static_cast<double>(r) * r / theta);
  }

  std::vector<double> apply(std::span<const double> in, int vdim) const {
    const int w = width_, h = height_;
    const int radius = static_cast<int>(taps_.size()) - 1;
    std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double* o = tmp.data() + (static_cast<std::size_t>(y) * w + x) * vdim;
        for (int dx = std::max(-radius, -x); dx <= std::min(radius, w - 1 - x); ++dx) {
          const double t = taps_[std::abs(dx)];
          const double* v = in.data() + (static_cast<std::size_t>(y) * w + x + dx) * vdim;
          for (int c = 0; c < vdim; ++c) o[c] += t * v[c];
        }
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double* o = out.data() + (static_cast<std::size_t>(y) * w + x) * vdim;
        for (int dy = std::max(-radius, -y); dy <= std::min(radius, h - 1 - y); ++dy) {
          const double t = taps_[std::abs(dy)];
          const double* v = tmp.data() + (static_cast<std::size_t>(y + dy) * w + x) * vdim;
          for (int c = 0; c < vdim; ++c) o[c] += t * v[c];
        }
      }
    return out;
  }

 private:
  int width_, height_;
  std::vector<double> taps_;
};

namespace detail {

inline std::vector<double> smoothness_features(int w, int h, double theta_gamma) {
  std::vector<double> f(static_cast<std::size_t>(w) * h * 2);
  const double s = 1.0 / std::sqrt(theta_gamma);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      f[2 * k] = x * s;
      f[2 * k + 1] = y * s;
    }
  return f;
}

inline std::vector<double> appearance_features(const Image& img, double theta_alpha, double theta_beta) {
  std::vector<double> f(img.size() * 5);
  const double sp = 1.0 / std::sqrt(theta_alpha);
  const double sc = 1.0 / std::sqrt(theta_beta);
  for (std::size_t k = 0; k < img.size(); ++k) {
    f[5 * k] = static_cast<double>(k % img.width()) * sp;
    f[5 * k + 1] = static_cast<double>(k / img.width()) * sp;
    f[5 * k + 2] = img[k].r * sc;
    f[5 * k + 3] = img[k].g * sc;
    f[5 * k + 4] = img[k].b * sc;
  }
  return f;
}

// Computes normalized messages for one kernel; `filter(v, vdim)` returns the
// kernel sum including each pixel's own term.
template <typename Filter>
void normalized_message(const Filter& filter, std::span<const double> q, std::size_t slots,
                        std::span<const double> inv_norm, std::vector<double>& out) {
  out = filter(q, static_cast<int>(slots));
  const std::size_t n = inv_norm.size();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t s = 0; s < slots; ++s) out[k * slots + s] *= inv_norm[k];
}

}  // namespace detail

// Mean-field inference from explicit unaries (pixels x slots, energies).
inline CrfResult mean_field(std::span<const double> unary, std::size_t slots, const Image& img,
                            const CrfParams& params, FilterMethod method = FilterMethod::Auto) {
  params.validate();
  const std::size_t n = img.size();
  if (slots < 1 || unary.size() != n * slots) throw Error("unary size does not match image");
  for (double u : unary)
    if (!std::isfinite(u)) throw Error("non-finite unaries");
  const int w = img.width(), h = img.height();
  if (method == FilterMethod::Auto) method = n <= kFastFilterMaxPixels ? FilterMethod::Fast : FilterMethod::Lattice;

  using FilterFn = std::function<std::vector<double>(std::span<const double>, int)>;
  FilterFn smooth, appear;
  if (method == FilterMethod::BruteForce) {
    if (n > kBruteForceMaxPoints) throw Error("brute-force filter limited to 64x64 pixels");
    auto fs = std::make_shared<std::vector<double>>(detail::smoothness_features(w, h, params.theta_gamma));
    smooth = [fs](std::span<const double> v, int vd) {
      auto out = gaussian_filter_bruteforce(v, vd, *fs, 2);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
      return out;
    };
    if (params.alpha > 0.0) {
      auto fa = std::make_shared<std::vector<double>>(
          detail::appearance_features(img, params.theta_alpha, params.theta_beta));
      appear = [fa](std::span<const double> v, int vd) {
        auto out = gaussian_filter_bruteforce(v, vd, *fa, 5);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
        return out;
      };
    }
  } else if (method == FilterMethod::Fast) {
    auto grid = std::make_shared<SeparableGridFilter>(w, h, params.theta_gamma);
    smooth = [grid](std::span<const double> v, int vd) { return grid->apply(v, vd); };
    if (params.alpha > 0.0) {
      auto tree = std::make_shared<GaussTransformTree>(
          detail::appearance_features(img, params.theta_alpha, params.theta_beta), 5, kAppearanceTolerance);
      appear = [tree](std::span<const double> v, int vd) { return tree->apply(v, vd); };
    }
  } else {
    auto fs = std::make_shared<FastGaussianFilter>(detail::smoothness_features(w, h, params.theta_gamma), 2);
    smooth = [fs](std::span<const double> v, int vd) { return fs->apply(v, vd); };
    if (params.alpha > 0.0) {
      auto lattice = std::make_shared<FastGaussianFilter>(
          detail::appearance_features(img, params.theta_alpha, params.theta_beta), 5);
      appear = [lattice](std::span<const double> v, int vd) { return lattice->apply(v, vd); };
    }
  }

  const std::vector<double> ones(n, 1.0);
  auto inverse_norm = [&](const FilterFn& f) {
    auto norm = f(ones, 1);
    for (auto& v : norm) v = 1.0 / std::max(v, 1e-300);
    return norm;
  };
  const auto inv_smooth = inverse_norm(smooth);
  std::vector<double> inv_appear;
  if (appear) inv_appear = inverse_norm(appear);

  CrfResult res;
  res.slots = slots;
  std::vector<double> q(n * slots), logits(n * slots), ms, ma;
  auto softmax = [&](std::vector<double>& dst) {
    for (std::size_t k = 0; k < n; ++k) {
      double* lk = logits.data() + k * slots;
      const double mx = *std::max_element(lk, lk + slots);
      double z = 0.0;
      for (std::size_t s = 0; s < slots; ++s) z += std::exp(lk[s] - mx);
      for (std::size_t s = 0; s < slots; ++s) dst[k * slots + s] = std::exp(lk[s] - mx) / z;
    }
  };
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = -unary[i];
  softmax(q);

  std::vector<double> next(n * slots);
  for (int it = 0; it < params.iterations; ++it) {
    detail::normalized_message(smooth, q, slots, inv_smooth, ms);
    if (appear) detail::normalized_message(appear, q, slots, inv_appear, ma);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      logits[i] = -unary[i] + ms[i];
      if (appear) logits[i] += params.alpha * ma[i];
    }
    softmax(next);
    double change = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) change = std::max(change, std::abs(next[i] - q[i]));
    res.max_change.push_back(change);
    q.swap(next);
  }
  res.marginals = std::move(q);
  return res;
}

// Argmax over marginals; ties go to the lowest slot.
inline std::vector<std::size_t> argmax_slots(const CrfResult& r) {
  const std::size_t n = r.marginals.size() / r.slots;
  std::vector<std::size_t> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double* q = r.marginals.data() + k * r.slots;
    out[k] = static_cast<std::size_t>(std::max_element(q, q + r.slots) - q);
  }
  return out;
}

inline std::vector<double> unaries_from_distance_maps(const DistanceMaps& dm, double unary_scale) {
  const std::size_t n = dm.pixels(), slots = dm.slots();
  std::vector<double> u(n * slots);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t s = 0; s < slots; ++s) u[k * slots + s] = unary_scale * dm.at(s, k);
  return u;
}

inline CrfResult infer_densecrf(const DistanceMaps& dm, const Image& img, const CrfParams& params,
                                FilterMethod method = FilterMethod::Auto) {
  if (dm.width != img.width() || dm.height != img.height()) throw Error("image does not match distance maps");
  const auto unary = unaries_from_distance_maps(dm, params.unary_scale);
  CrfResult res = mean_field(unary, dm.slots(), img, params, method);
  res.labels = LabelMap(img.width(), img.height());
  const auto best = argmax_slots(res);
  for (std::size_t k = 0; k < best.size(); ++k) res.labels[k] = dm.label_of(best[k]);
  return res;
}

}  // namespace magicpaint
