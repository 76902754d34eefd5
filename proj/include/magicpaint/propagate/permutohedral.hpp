#pragma once

// Permutohedral lattice for high-dimensional Gaussian filtering: splat each
// point onto the vertices of its enclosing simplex, blur along the d+1 lattice
// axes with a [1 2 1] stencil, slice back with the same barycentric weights.
// Cost is linear in the number of points.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "magicpaint/core/types.hpp"

namespace magicpaint {

inline constexpr int kMaxLatticeDim = 5;

class PermutohedralLattice {
 public:
  // `features` holds n points of `dim` coordinates each. The filter
  // approximates sum_j exp(-||f_i - f_j||^2 / 2) v_j.
  PermutohedralLattice(std::span<const double> features, int dim) : d_(dim) {
    if (dim < 1 || dim > kMaxLatticeDim) throw Error("unsupported feature dimension");
    if (features.size() % dim != 0) throw Error("feature buffer size is not a multiple of dim");
    n_ = features.size() / dim;
    const int d = d_;
    offset_.resize((d + 1) * n_);
    barycentric_.resize((d + 1) * n_);

    std::array<double, kMaxLatticeDim> scale{};
    const double inv_std = std::sqrt(2.0 / 3.0) * (d + 1);
    for (int i = 0; i < d; ++i) scale[i] = inv_std / std::sqrt((i + 1.0) * (i + 2.0));
    std::array<int, (kMaxLatticeDim + 1) * (kMaxLatticeDim + 1)> canonical{};
    for (int i = 0; i <= d; ++i) {
      for (int j = 0; j <= d - i; ++j) canonical[i * (d + 1) + j] = i;
      for (int j = d - i + 1; j <= d; ++j) canonical[i * (d + 1) + j] = i - (d + 1);
    }

    std::unordered_map<Key, std::int32_t, KeyHash> table;
    table.reserve((d + 1) * n_);
    std::array<double, kMaxLatticeDim + 1> elevated{};
    std::array<int, kMaxLatticeDim + 1> rem0{};
    std::array<int, kMaxLatticeDim + 1> rank{};
    std::array<double, kMaxLatticeDim + 2> bary{};
    for (std::size_t k = 0; k < n_; ++k) {
      const double* f = features.data() + k * d;
      double sm = 0.0;
      for (int j = d; j > 0; --j) {
        const double cf = f[j - 1] * scale[j - 1];
        elevated[j] = sm - j * cf;
        sm += cf;
      }
      elevated[0] = sm;

      // nearest remainder-0 lattice point
      int sum = 0;
      for (int i = 0; i <= d; ++i) {
        const double v = elevated[i] / (d + 1);
        const double up = std::ceil(v) * (d + 1);
        const double down = std::floor(v) * (d + 1);
        rem0[i] = static_cast<int>(up - elevated[i] < elevated[i] - down ? up : down);
        sum += rem0[i];
      }
      sum /= d + 1;

      rank.fill(0);
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j <= d; ++j)
          if (elevated[i] - rem0[i] < elevated[j] - rem0[j])
            ++rank[i];
          else
            ++rank[j];
      if (sum > 0) {
        for (int i = 0; i <= d; ++i) {
          if (rank[i] >= d + 1 - sum) {
            rem0[i] -= d + 1;
            rank[i] += sum - (d + 1);
          } else {
            rank[i] += sum;
          }
        }
      } else if (sum < 0) {
        for (int i = 0; i <= d; ++i) {
          if (rank[i] < -sum) {
            rem0[i] += d + 1;
            rank[i] += (d + 1) + sum;
          } else {
            rank[i] += sum;
          }
        }
      }

      bary.fill(0.0);
      for (int i = 0; i <= d; ++i) {
        const double v = (elevated[i] - rem0[i]) / (d + 1);
        bary[d - rank[i]] += v;
        bary[d - rank[i] + 1] -= v;
      }
      bary[0] += 1.0 + bary[d + 1];

      for (int r = 0; r <= d; ++r) {
        Key key{};
        for (int i = 0; i < d; ++i) key[i] = rem0[i] + canonical[r * (d + 1) + rank[i]];
        auto [it, inserted] = table.emplace(key, static_cast<std::int32_t>(keys_.size()));
        if (inserted) keys_.push_back(key);
        offset_[k * (d + 1) + r] = it->second;
        barycentric_[k * (d + 1) + r] = bary[r];
      }
    }

    const std::size_t m = keys_.size();
    neighbors_.resize((d + 1) * m);
    for (int j = 0; j <= d; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const Key& key = keys_[i];
        Key n1{}, n2{};
        for (int k = 0; k < d; ++k) {
          n1[k] = key[k] - 1;
          n2[k] = key[k] + 1;
        }
        if (j < d) {
          n1[j] = key[j] + d;
          n2[j] = key[j] - d;
        }
        auto a = table.find(n1);
        auto b = table.find(n2);
        neighbors_[j * m + i] = {a == table.end() ? -1 : a->second, b == table.end() ? -1 : b->second};
      }
    }
  }

  std::size_t points() const { return n_; }
  std::size_t vertices() const { return keys_.size(); }

  // in/out: n points x `vdim` values, row-major.
  void filter(std::span<const double> in, std::span<double> out, int vdim) const {
    if (in.size() != n_ * vdim || out.size() != n_ * vdim) throw Error("filter buffer size mismatch");
    const int d = d_;
    const std::size_t m = keys_.size();
    // slot 0 is a zero sentinel for missing neighbors
    std::vector<double> values((m + 1) * vdim, 0.0);
    std::vector<double> next((m + 1) * vdim, 0.0);
    for (std::size_t k = 0; k < n_; ++k)
      for (int r = 0; r <= d; ++r) {
        const std::size_t o = static_cast<std::size_t>(offset_[k * (d + 1) + r]) + 1;
        const double w = barycentric_[k * (d + 1) + r];
        for (int c = 0; c < vdim; ++c) values[o * vdim + c] += w * in[k * vdim + c];
      }
    for (int j = 0; j <= d; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const auto [a, b] = neighbors_[j * m + i];
        const double* va = values.data() + static_cast<std::size_t>(a + 1) * vdim;
        const double* vb = values.data() + static_cast<std::size_t>(b + 1) * vdim;
        const double* vo = values.data() + (i + 1) * vdim;
        double* vn = next.data() + (i + 1) * vdim;
        for (int c = 0; c < vdim; ++c) vn[c] = vo[c] + 0.5 * (va[c] + vb[c]);
      }
      values.swap(next);
    }
    const double alpha = 1.0 / (1.0 + std::pow(2.0, -d));
    for (std::size_t k = 0; k < n_; ++k) {
      double* o = out.data() + k * vdim;
      for (int c = 0; c < vdim; ++c) o[c] = 0.0;
      for (int r = 0; r <= d; ++r) {
        const std::size_t v = static_cast<std::size_t>(offset_[k * (d + 1) + r]) + 1;
        const double w = barycentric_[k * (d + 1) + r] * alpha;
        for (int c = 0; c < vdim; ++c) o[c] += w * values[v * vdim + c];
      }
    }
  }

 private:
  using Key = std::array<std::int32_t, kMaxLatticeDim>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = 0;
      for (auto v : k) h = h * 2531011u + static_cast<std::uint32_t>(v);
      return h;
    }
  };

  int d_;
  std::size_t n_ = 0;
  std::vector<std::int32_t> offset_;
  std::vector<double> barycentric_;
  std::vector<Key> keys_;
  std::vector<std::pair<std::int32_t, std::int32_t>> neighbors_;
};

}  // namespace magicpaint
