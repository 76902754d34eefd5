#pragma once

// Seeded synthetic data for tests, benchmarks and the `synth` command.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "magicpaint/core/recording.hpp"
#include "magicpaint/core/types.hpp"
#include "magicpaint/embed/train.hpp"

namespace magicpaint {

inline Rgb hsv_to_rgb(double h_deg, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(std::fmod(h_deg, 360.0) + 360.0, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  auto to8 = [&](double t) { return static_cast<std::uint8_t>(std::clamp(std::lround((t + m) * 255.0), 0L, 255L)); };
  return {to8(r), to8(g), to8(b)};
}

struct Scene {
  Image image;
  GroundTruth gt;
  Recording recording;
};

struct SceneParams {
  int size = 64;
  int regions = 4;
  double noise = 6.0;            // per-channel Gaussian noise, 8-bit units
  std::int64_t switch_ms = 4000;  // gap before the first stroke of a class
  std::int64_t stroke_ms = 2500;  // gap before the other strokes
  std::int64_t jitter_ms = 300;
};

namespace detail {

inline std::int64_t jittered(std::mt19937_64& rng, std::int64_t base, std::int64_t jitter) {
  if (jitter <= 0) return base;
  return base + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(2 * jitter + 1)) - jitter;
}

}  // namespace detail

// `regions` full-width bands (vertical bands when the seed picks a transpose)
// with well-separated hues plus noise. Ground-truth segment i is band i; the
// recording labels band i with label i using three straight strokes whose
// union is exactly the band.
inline Scene make_band_scene(std::uint64_t seed, const SceneParams& p = {}) {
  if (p.size < 4 * p.regions || p.regions < 1 || p.regions > 8) throw Error("unsupported scene parameters");
  std::mt19937_64 rng(seed);
  const int n = p.size;
  const bool transpose = (rng() & 1u) != 0;

  // band boundaries: equal split jittered by up to a quarter band
  std::vector<int> edge(p.regions + 1);
  edge[0] = 0;
  edge[p.regions] = n;
  const int band = n / p.regions;
  for (int i = 1; i < p.regions; ++i) {
    const int j = band / 4;
    edge[i] = i * band + static_cast<int>(rng() % static_cast<std::uint64_t>(2 * j + 1)) - j;
  }

  const double hue0 = static_cast<double>(rng() % 360);
  std::vector<Rgb> color(p.regions);
  for (int i = 0; i < p.regions; ++i) {
    const double s = 0.55 + 0.1 * static_cast<double>(rng() % 4);
    const double v = 0.55 + 0.1 * static_cast<double>(rng() % 4);
    color[i] = hsv_to_rgb(hue0 + 360.0 * i / p.regions, s, v);
  }

  Scene sc;
  sc.image = Image(n, n);
  sc.gt.segments = LabelMap(n, n);
  std::normal_distribution<double> noise(0.0, p.noise);
  auto clip = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int along = transpose ? x : y;
      int r = 0;
      while (along >= edge[r + 1]) ++r;
      const Rgb c = color[r];
      sc.image.at(x, y) = {clip(c.r + noise(rng)), clip(c.g + noise(rng)), clip(c.b + noise(rng))};
      sc.gt.segments.at(x, y) = static_cast<LabelId>(r + 1);
    }
  std::map<LabelId, LabelId> binding;
  for (int i = 1; i <= p.regions; ++i) {
    sc.gt.classes[static_cast<LabelId>(i)] = "band" + std::to_string(i);
    binding[static_cast<LabelId>(i)] = static_cast<LabelId>(i);
  }
  sc.gt.label_binding = binding;

  // Three lines per band. A stroke of radius r covers the 2r - 1 rows around
  // its center, so the top and bottom strokes take q rows each (q odd,
  // 3q >= h) and the middle one covers what lies between them.
  Recording& rec = sc.recording;
  rec.image = "scene_" + std::to_string(seed) + ".png";
  rec.width = rec.height = n;
  std::int64_t t = 0;
  for (int i = 0; i < p.regions; ++i) {
    const auto label = static_cast<LabelId>(i + 1);
    rec.labels[label] = sc.gt.classes[label];
    const int lo = edge[i], hi = edge[i + 1] - 1;
    const int h = hi - lo + 1;
    const int q = ((h + 2) / 3) | 1;
    const int m = h - 2 * q;
    std::array<std::pair<int, int>, 3> strokes;  // (center, radius)
    strokes[0] = {lo + (q - 1) / 2, (q + 1) / 2};
    strokes[2] = {hi - (q - 1) / 2, (q + 1) / 2};
    if (m > 0) {
      const int mo = m | 1;
      strokes[1] = {lo + q + (m - 1) / 2, (mo + 1) / 2};
    } else {
      strokes[1] = {lo + (h - 1) / 2, (q + 1) / 2};
    }
    for (int k = 0; k < 3; ++k) {
      RecordingAction a;
      a.kind = ActionKind::StrokeLine;
      a.label = label;
      const int c = strokes[k].first;
      a.radius = strokes[k].second;
      a.points = transpose ? std::vector<Point>{{c, 0}, {c, n - 1}} : std::vector<Point>{{0, c}, {n - 1, c}};
      t += detail::jittered(rng, k == 0 ? p.switch_ms : p.stroke_ms, p.jitter_ms);
      a.t_ms = t;
      rec.actions.push_back(std::move(a));
    }
  }
  return sc;
}

// Two-texture training data: each image is split by a random line into a
// region of texture A (label 1) and one of texture B (label 2). The textures
// differ in hue and in structure (stripes versus speckle), with per-image
// brightness changes.
inline std::vector<TrainSample> make_texture_dataset(std::size_t count, int size, std::uint64_t seed) {
  if (count == 0 || size < 4) throw Error("unsupported dataset parameters");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 10.0);
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    TrainSample s{Image(size, size), LabelMap(size, size)};
    const double angle = unit(rng) * 2.0 * M_PI;
    const double nx = std::cos(angle), ny = std::sin(angle);
    const double offset = (unit(rng) - 0.5) * size * 0.5;
    const double gain = 0.8 + 0.4 * unit(rng);
    const int period = 3 + static_cast<int>(rng() % 3);
    const double ch = size / 2.0;
    auto clip = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const bool a = (x - ch) * nx + (y - ch) * ny > offset;
        double r, g, b;
        if (a) {
          const double stripe = ((x + y) / period) % 2 == 0 ? 40.0 : -40.0;
          r = 180 + stripe, g = 90 + stripe / 2, b = 60;
        } else {
          const double speck = unit(rng) < 0.2 ? 60.0 : 0.0;
          r = 60 + speck, g = 110 + speck, b = 170 + speck;
        }
        s.image.at(x, y) = {clip(gain * r + noise(rng)), clip(gain * g + noise(rng)), clip(gain * b + noise(rng))};
        s.labels.at(x, y) = a ? 1 : 2;
      }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace magicpaint
