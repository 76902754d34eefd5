#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "magicpaint/core/types.hpp"
#include "magicpaint/propagate/permutohedral.hpp"

namespace magicpaint {

inline constexpr std::size_t kBruteForceMaxPoints = 64 * 64;

// out_k = sum_{j != k} exp(-||f_k - f_j||^2) v_j, exactly, in O(n^2).
// values: n x vdim, features: n x fdim (both row-major).
inline std::vector<double> gaussian_filter_bruteforce(std::span<const double> values, int vdim,
                                                      std::span<const double> features, int fdim) {
  if (vdim < 1 || fdim < 1) throw Error("filter dimensions must be positive");
  const std::size_t n = features.size() / fdim;
  if (features.size() != n * fdim || values.size() != n * vdim) throw Error("filter buffer size mismatch");
  if (n > kBruteForceMaxPoints) throw Error("brute-force filter limited to 64x64 pixels");
  std::vector<double> out(n * vdim, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double* fk = features.data() + k * fdim;
    double* ok = out.data() + k * vdim;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      const double* fj = features.data() + j * fdim;
      double d = 0.0;
      for (int c = 0; c < fdim; ++c) d += (fk[c] - fj[c]) * (fk[c] - fj[c]);
      const double w = std::exp(-d);
      const double* vj = values.data() + j * vdim;
      for (int c = 0; c < vdim; ++c) ok[c] += w * vj[c];
    }
  }
  return out;
}

// Linear-time approximation of the same kernel via the permutohedral
// lattice. Unlike the brute-force route the output includes each point's own
// contribution (weight close to 1), so it is meant to be used normalized:
// filter(v) / filter(1).
class FastGaussianFilter {
 public:
  FastGaussianFilter(std::span<const double> features, int fdim)
      : lattice_(scaled(features), fdim) {}

  std::vector<double> apply(std::span<const double> values, int vdim) const {
    std::vector<double> out(values.size());
    lattice_.filter(values, out, vdim);
    return out;
  }

  std::size_t points() const { return lattice_.points(); }

 private:
  // the lattice realizes exp(-||f||^2 / 2); scale by sqrt(2) for exp(-||f||^2)
  static std::vector<double> scaled(std::span<const double> f) {
    std::vector<double> out(f.begin(), f.end());
    for (auto& v : out) v *= std::sqrt(2.0);
    return out;
  }

  PermutohedralLattice lattice_;
};

inline std::vector<double> gaussian_filter_fast(std::span<const double> values, int vdim,
                                                std::span<const double> features, int fdim) {
  if (fdim < 1 || fdim > kMaxLatticeDim) throw Error("unsupported feature dimension");
  return FastGaussianFilter(features, fdim).apply(values, vdim);
}

}  // namespace magicpaint
