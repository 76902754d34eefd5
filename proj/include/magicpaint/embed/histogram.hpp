#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "magicpaint/core/types.hpp"
#include "magicpaint/embed/field.hpp"
#include "magicpaint/embed/slic.hpp"

namespace magicpaint {

inline constexpr int kHueBins = 10;
inline constexpr int kSatBins = 10;
inline constexpr int kHistogramDim = kHueBins + kSatBins;

struct HueSat {
  double hue;  // degrees in [0, 360); 0 for achromatic pixels
  double sat;  // [0, 1]
};

inline HueSat rgb_to_hue_sat(Rgb c) {
  const int mx = std::max({c.r, c.g, c.b});
  const int mn = std::min({c.r, c.g, c.b});
  const int delta = mx - mn;
  if (mx == 0 || delta == 0) return {0.0, 0.0};
  const double sat = static_cast<double>(delta) / mx;
  double hue;
  if (mx == c.r)
    hue = 60.0 * (static_cast<double>(c.g - c.b) / delta);
  else if (mx == c.g)
    hue = 60.0 * (static_cast<double>(c.b - c.r) / delta) + 120.0;
  else
    hue = 60.0 * (static_cast<double>(c.r - c.g) / delta) + 240.0;
  if (hue < 0.0) hue += 360.0;
  return {hue, sat};
}

inline int hue_bin(double hue) { return std::clamp(static_cast<int>(hue / 360.0 * kHueBins), 0, kHueBins - 1); }
inline int sat_bin(double sat) { return std::clamp(static_cast<int>(sat * kSatBins), 0, kSatBins - 1); }

// Every pixel carries its segment's L1-normalized hue histogram followed by
// its L1-normalized saturation histogram.
inline EmbeddingField histogram_embedding(const Image& img, const Superpixels& sp) {
  if (sp.width != img.width() || sp.height != img.height()) throw Error("superpixel map does not match image");
  std::vector<std::array<double, kHistogramDim>> hist(static_cast<std::size_t>(sp.count), std::array<double, kHistogramDim>{});
  std::vector<double> sizes(static_cast<std::size_t>(sp.count), 0.0);
  for (std::size_t k = 0; k < img.size(); ++k) {
    const auto hs = rgb_to_hue_sat(img[k]);
    auto& hh = hist[sp.ids[k]];
    hh[hue_bin(hs.hue)] += 1.0;
    hh[kHueBins + sat_bin(hs.sat)] += 1.0;
    sizes[sp.ids[k]] += 1.0;
  }
  EmbeddingField field(img.width(), img.height(), kHistogramDim);
  for (std::size_t k = 0; k < img.size(); ++k) {
    const auto id = sp.ids[k];
    auto v = field.at(k);
    for (int i = 0; i < kHistogramDim; ++i) v[i] = static_cast<float>(hist[id][i] / sizes[id]);
  }
  return field;
}

inline EmbeddingField histogram_embedding(const Image& img, const SlicParams& params) {
  return histogram_embedding(img, slic_superpixels(img, params));
}

}  // namespace magicpaint
