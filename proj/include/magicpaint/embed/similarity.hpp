#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "magicpaint/embed/field.hpp"

namespace magicpaint {

inline constexpr double kLossEpsilon = 1e-7;

// sigma(d) = 2 / (1 + exp(d)) for squared distance d; 1 at d = 0, -> 0 as d grows.
inline double similarity_from_sqdist(double sqdist) {
  if (sqdist > 700.0) return 0.0;
  return 2.0 / (1.0 + std::exp(sqdist));
}

template <typename A, typename B>
double pairwise_similarity(std::span<A> a, std::span<B> b) {
  return similarity_from_sqdist(squared_distance(a, b));
}

// Binary cross-entropy on sigma: -log(sigma) for same-class pairs,
// -log(1 - sigma) otherwise. sigma is clamped to [eps, 1 - eps].
inline double pairwise_loss(double sigma, bool same_class) {
  if (!(sigma > 0.0) || sigma > 1.0) throw Error("similarity must lie in (0, 1]");
  const double s = std::clamp(sigma, kLossEpsilon, 1.0 - kLossEpsilon);
  return same_class ? -std::log(s) : -std::log(1.0 - s);
}

struct PairLoss {
  double loss;
  double dloss_dsqdist;
};

// Loss of a pair as a function of squared embedding distance, with its
// derivative. Same-class pairs use the exact form log(1 + e^d) - log 2 so the
// gradient never vanishes for far-apart positives; different-class pairs
// follow the clamped pairwise_loss.
inline PairLoss pair_loss_from_sqdist(double d, bool same_class) {
  if (same_class) {
    // softplus(d) - log 2, derivative 1 - sigma / 2
    const double sp = d > 30.0 ? d + std::log1p(std::exp(-d)) : std::log1p(std::exp(d));
    const double sigma = similarity_from_sqdist(d);
    return {sp - std::log(2.0), 1.0 - 0.5 * sigma};
  }
  const double sigma = similarity_from_sqdist(d);
  if (sigma > 1.0 - kLossEpsilon) return {-std::log(kLossEpsilon), 0.0};
  if (sigma < kLossEpsilon) return {-std::log1p(-kLossEpsilon), 0.0};
  // dL/dsigma = 1 / (1 - sigma), dsigma/dd = -sigma (1 - sigma / 2)
  return {-std::log1p(-sigma), -sigma * (1.0 - 0.5 * sigma) / (1.0 - sigma)};
}

}  // namespace magicpaint
