#pragma once

// Error-controlled Gaussian transform over a kd-tree:
//   out_k = sum_j exp(-||f_k - f_j||^2) v_j   (self included)
// For each query the tree is walked near-first; a node is summarized by its
// value sum times the midpoint of its kernel bounds when the half-width of
// those bounds is within epsilon * Z_lb / n, where Z_lb is a running lower
// bound on the query's total kernel mass. The numerator error is then at
// most epsilon * Z * max|v|, i.e. normalized outputs are accurate to about
// 2 * epsilon. Interaction lists are built once and reused by every apply().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "magicpaint/core/types.hpp"

namespace magicpaint {

class GaussTransformTree {
 public:
  static constexpr int kMaxDim = 5;
  static constexpr std::size_t kLeafSize = 16;
  static constexpr std::size_t kMaxCachedInteractions = std::size_t{1} << 25;

  GaussTransformTree(std::span<const double> features, int fdim, double epsilon = 1e-5)
      : fdim_(fdim), epsilon_(epsilon) {
    if (fdim < 1 || fdim > kMaxDim) throw Error("unsupported feature dimension");
    if (features.size() % fdim != 0) throw Error("feature buffer size is not a multiple of dim");
    if (!(epsilon > 0.0)) throw Error("tolerance must be > 0");
    n_ = features.size() / fdim;
    features_.assign(features.begin(), features.end());
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0u);
    if (n_ > 0) build(0, n_);
    build_lists();
  }

  std::size_t points() const { return n_; }
  std::size_t interactions() const { return entry_index_.size(); }
  bool cached() const { return cached_; }

  // values: n x vdim row-major; returns n x vdim.
  std::vector<double> apply(std::span<const double> values, int vdim) const {
    if (vdim < 1 || values.size() != n_ * vdim) throw Error("filter buffer size mismatch");
    // node sums, children before parents (nodes are created parent-first)
    std::vector<double> sums(nodes_.size() * vdim, 0.0);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      const Node& nd = nodes_[i];
      double* s = sums.data() + i * vdim;
      if (nd.left < 0) {
        for (std::size_t p = nd.begin; p < nd.end; ++p) {
          const double* v = values.data() + static_cast<std::size_t>(order_[p]) * vdim;
          for (int c = 0; c < vdim; ++c) s[c] += v[c];
        }
      } else {
        const double* a = sums.data() + static_cast<std::size_t>(nd.left) * vdim;
        const double* b = sums.data() + static_cast<std::size_t>(nd.right) * vdim;
        for (int c = 0; c < vdim; ++c) s[c] = a[c] + b[c];
      }
    }
    std::vector<double> out(n_ * vdim, 0.0);
    for (std::size_t k = 0; k < n_; ++k) {
      double* o = out.data() + k * vdim;
      if (!cached_) {
        traverse(
            k,
            [&](std::uint32_t j, double w) {
              const double* v = values.data() + static_cast<std::size_t>(j) * vdim;
              for (int c = 0; c < vdim; ++c) o[c] += w * v[c];
            },
            [&](std::int32_t id, double w) {
              const double* v = sums.data() + static_cast<std::size_t>(id) * vdim;
              for (int c = 0; c < vdim; ++c) o[c] += w * v[c];
            });
        continue;
      }
      for (std::size_t e = entry_begin_[k]; e < entry_begin_[k + 1]; ++e) {
        const std::uint32_t idx = entry_index_[e];
        const double w = entry_weight_[e];
        const double* v = idx < n_ ? values.data() + static_cast<std::size_t>(idx) * vdim
                                   : sums.data() + static_cast<std::size_t>(idx - n_) * vdim;
        for (int c = 0; c < vdim; ++c) o[c] += w * v[c];
      }
    }
    return out;
  }

 private:
  struct Node {
    std::size_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    double lo[kMaxDim] = {}, hi[kMaxDim] = {};
    std::size_t count() const { return end - begin; }
  };

  const double* point(std::size_t j) const { return features_.data() + j * fdim_; }

  std::int32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    Node nd;
    nd.begin = begin;
    nd.end = end;
    for (int c = 0; c < fdim_; ++c) {
      nd.lo[c] = point(order_[begin])[c];
      nd.hi[c] = nd.lo[c];
    }
    for (std::size_t p = begin; p < end; ++p)
      for (int c = 0; c < fdim_; ++c) {
        nd.lo[c] = std::min(nd.lo[c], point(order_[p])[c]);
        nd.hi[c] = std::max(nd.hi[c], point(order_[p])[c]);
      }
    int axis = 0;
    for (int c = 1; c < fdim_; ++c)
      if (nd.hi[c] - nd.lo[c] > nd.hi[axis] - nd.lo[axis]) axis = c;
    if (end - begin > kLeafSize && nd.hi[axis] > nd.lo[axis]) {
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](std::uint32_t a, std::uint32_t b) { return point(a)[axis] < point(b)[axis]; });
      nodes_[id] = nd;
      const auto l = build(begin, mid);
      const auto r = build(mid, end);
      nodes_[id].left = l;
      nodes_[id].right = r;
    } else {
      nodes_[id] = nd;
    }
    return id;
  }

  // squared distance bounds from q to the node box
  void bounds(const double* q, const Node& nd, double& dmin, double& dmax) const {
    dmin = 0.0;
    dmax = 0.0;
    for (int c = 0; c < fdim_; ++c) {
      const double below = nd.lo[c] - q[c], above = q[c] - nd.hi[c];
      const double gap = std::max({below, above, 0.0});
      const double far = std::max(std::abs(q[c] - nd.lo[c]), std::abs(q[c] - nd.hi[c]));
      dmin += gap * gap;
      dmax += far * far;
    }
  }

  // Walks the tree for query k, calling point(j, w) for exact terms and
  // node(id, w) for summarized nodes.
  template <typename OnPoint, typename OnNode>
  void traverse(std::size_t k, OnPoint&& on_point, OnNode&& on_node) const {
    struct Pending {
      std::int32_t node;
      double kmin, kmax;
    };
    const double n = static_cast<double>(n_);
    const double* q = point(k);
    double dmin, dmax;
    bounds(q, nodes_[0], dmin, dmax);
    std::vector<Pending> stack;
    stack.push_back({0, std::exp(-dmax), std::exp(-dmin)});
    // lower bound on sum_j k(q, j): resolved mass plus kmin * count of pending nodes
    double z_lb = std::exp(-dmax) * static_cast<double>(nodes_[0].count());
    while (!stack.empty()) {
      const Pending cur = stack.back();
      stack.pop_back();
      const Node& nd = nodes_[cur.node];
      const double cnt = static_cast<double>(nd.count());
      const double half = 0.5 * (cur.kmax - cur.kmin);
      if (half <= epsilon_ * z_lb / n) {
        const double mid = 0.5 * (cur.kmax + cur.kmin);
        if (mid > 0.0) on_node(cur.node, mid);
        continue;
      }
      z_lb -= cur.kmin * cnt;
      if (nd.left < 0) {
        for (std::size_t p = nd.begin; p < nd.end; ++p) {
          const std::uint32_t j = order_[p];
          const double* f = point(j);
          double d = 0.0;
          for (int c = 0; c < fdim_; ++c) d += (q[c] - f[c]) * (q[c] - f[c]);
          const double w = std::exp(-d);
          z_lb += w;
          if (w > 0.0) on_point(j, w);
        }
        continue;
      }
      Pending ch[2];
      const std::int32_t kids[2] = {nd.left, nd.right};
      for (int i = 0; i < 2; ++i) {
        bounds(q, nodes_[kids[i]], dmin, dmax);
        ch[i] = {kids[i], std::exp(-dmax), std::exp(-dmin)};
        z_lb += ch[i].kmin * static_cast<double>(nodes_[kids[i]].count());
      }
      // push the nearer child last so it is expanded first
      if (ch[0].kmax > ch[1].kmax) std::swap(ch[0], ch[1]);
      stack.push_back(ch[0]);
      stack.push_back(ch[1]);
    }
  }

  void build_lists() {
    entry_begin_.assign(n_ + 1, 0);
    for (std::size_t k = 0; k < n_; ++k) {
      entry_begin_[k] = entry_index_.size();
      traverse(
          k,
          [&](std::uint32_t j, double w) {
            entry_index_.push_back(j);
            entry_weight_.push_back(static_cast<float>(w));
          },
          [&](std::int32_t id, double w) {
            entry_index_.push_back(static_cast<std::uint32_t>(n_ + id));
            entry_weight_.push_back(static_cast<float>(w));
          });
      if (entry_index_.size() > kMaxCachedInteractions) {
        // too many to keep; apply() walks the tree each time instead
        cached_ = false;
        entry_begin_.clear();
        entry_index_ = {};
        entry_weight_ = {};
        return;
      }
    }
    entry_begin_[n_] = entry_index_.size();
    cached_ = true;
  }

  int fdim_;
  double epsilon_;
  std::size_t n_ = 0;
  std::vector<double> features_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> entry_begin_;
  std::vector<std::uint32_t> entry_index_;
  std::vector<float> entry_weight_;
  bool cached_ = false;
};

}  // namespace magicpaint
