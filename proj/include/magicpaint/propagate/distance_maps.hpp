#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "magicpaint/core/types.hpp"
#include "magicpaint/embed/field.hpp"

namespace magicpaint {

// One map per active label plus a constant background distance. Slot 0 is
// the background; slot n >= 1 corresponds to labels[n - 1].
struct DistanceMaps {
  int width = 0;
  int height = 0;
  std::vector<LabelId> labels;             // ascending
  std::vector<std::vector<double>> maps;  // maps[i][k] for labels[i]
  double d0 = 0.0;

  std::size_t slots() const { return labels.size() + 1; }
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  double at(std::size_t slot, std::size_t k) const { return slot == 0 ? d0 : maps[slot - 1][k]; }
  LabelId label_of(std::size_t slot) const { return slot == 0 ? kUnlabeled : labels[slot - 1]; }
};

namespace detail {

// Groups pixels with bit-identical embedding vectors.
struct UniqueVectors {
  std::vector<std::uint32_t> id_of_pixel;
  std::vector<std::uint32_t> representative;  // one pixel per unique vector
};

inline UniqueVectors unique_vectors(const EmbeddingField& field) {
  UniqueVectors u;
  u.id_of_pixel.resize(field.pixels());
  std::unordered_map<std::string_view, std::uint32_t> index;
  index.reserve(field.pixels());
  const auto* base = reinterpret_cast<const char*>(field.data().data());
  const std::size_t stride = sizeof(float) * field.dim();
  for (std::size_t k = 0; k < field.pixels(); ++k) {
    std::string_view key(base + k * stride, stride);
    auto [it, inserted] = index.emplace(key, static_cast<std::uint32_t>(u.representative.size()));
    if (inserted) u.representative.push_back(static_cast<std::uint32_t>(k));
    u.id_of_pixel[k] = it->second;
  }
  return u;
}

}  // namespace detail

// D_n(k) = min over reference pixels j labeled n of ||e_k - e_j||^2.
// Support vectors are deduplicated (exact) and, when more than
// `max_support` distinct vectors remain, subsampled with a fixed seed.
// max_support = 0 disables subsampling.
inline DistanceMaps compute_distance_maps(const EmbeddingField& field, const LabelMap& reference,
                                          std::vector<LabelId> active_labels, double d0,
                                          std::size_t max_support = 5000) {
  if (reference.width() != field.width() || reference.height() != field.height())
    throw Error("reference does not match embedding field");
  if (active_labels.empty()) throw Error("no active labels");
  std::sort(active_labels.begin(), active_labels.end());
  active_labels.erase(std::unique(active_labels.begin(), active_labels.end()), active_labels.end());

  const auto uniq = detail::unique_vectors(field);
  const std::size_t nu = uniq.representative.size();
  const int dim = field.dim();

  DistanceMaps out;
  out.width = field.width();
  out.height = field.height();
  out.labels = active_labels;
  out.d0 = d0;
  for (LabelId label : active_labels) {
    if (label == kUnlabeled) throw Error("label 0 cannot be active");
    std::vector<std::uint8_t> in_support(nu, 0);
    for (std::size_t k = 0; k < reference.size(); ++k)
      if (reference[k] == label) in_support[uniq.id_of_pixel[k]] = 1;
    std::vector<std::uint32_t> support;
    for (std::uint32_t u = 0; u < nu; ++u)
      if (in_support[u]) support.push_back(u);
    if (support.empty()) throw Error("label " + std::to_string(label) + " has no reference pixels");
    if (max_support > 0 && support.size() > max_support) {
      std::mt19937_64 rng(0x5eed0000ULL + label);
      for (std::size_t i = 0; i < max_support; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, support.size() - 1);
        std::swap(support[i], support[pick(rng)]);
      }
      support.resize(max_support);
      std::sort(support.begin(), support.end());
    }
    std::vector<double> per_unique(nu, std::numeric_limits<double>::infinity());
    for (std::uint32_t u = 0; u < nu; ++u) {
      if (in_support[u] && (max_support == 0 || std::binary_search(support.begin(), support.end(), u))) {
        per_unique[u] = 0.0;
        continue;
      }
      const float* e = field.at(uniq.representative[u]).data();
      double best = std::numeric_limits<double>::infinity();
      for (std::uint32_t s : support) {
        const float* f = field.at(uniq.representative[s]).data();
        double d = 0.0;
        for (int c = 0; c < dim && d < best; ++c) {
          const double diff = static_cast<double>(e[c]) - f[c];
          d += diff * diff;
        }
        best = std::min(best, d);
      }
      per_unique[u] = best;
    }
    std::vector<double> map(field.pixels());
    for (std::size_t k = 0; k < map.size(); ++k) map[k] = per_unique[uniq.id_of_pixel[k]];
    // labeled pixels are at distance 0 even if their vector was subsampled away
    for (std::size_t k = 0; k < reference.size(); ++k)
      if (reference[k] == label) map[k] = 0.0;
    out.maps.push_back(std::move(map));
  }
  return out;
}

// 25th percentile of squared distances between `pairs` random pixel pairs
// (fixed seed, so the value is a function of the field alone). Pairs with
// identical embeddings are dropped; when nothing is left the field is constant
// and any positive value behaves the same, so 1 is returned.
inline double default_background_distance(const EmbeddingField& field, std::size_t pairs = 1000,
                                          double quantile = 0.25) {
  std::mt19937_64 rng(0xd0d0d0ULL);
  std::uniform_int_distribution<std::size_t> pick(0, field.pixels() - 1);
  std::vector<double> d;
  d.reserve(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    const double v = squared_distance(field.at(pick(rng)), field.at(pick(rng)));
    if (v > 0.0) d.push_back(v);
  }
  if (d.empty()) return 1.0;
  const auto nth = d.begin() + static_cast<std::ptrdiff_t>(quantile * static_cast<double>(d.size() - 1));
  std::nth_element(d.begin(), nth, d.end());
  return *nth;
}

// Per-pixel argmin over {D_0, D_1, ..., D_N}; ties go to the lowest slot.
inline LabelMap infer_1nn(const DistanceMaps& dm) {
  LabelMap out(dm.width, dm.height);
  for (std::size_t k = 0; k < dm.pixels(); ++k) {
    std::size_t best = 0;
    double best_d = dm.d0;
    for (std::size_t s = 1; s < dm.slots(); ++s)
      if (dm.maps[s - 1][k] < best_d) best_d = dm.maps[s - 1][k], best = s;
    out[k] = dm.label_of(best);
  }
  return out;
}

}  // namespace magicpaint
