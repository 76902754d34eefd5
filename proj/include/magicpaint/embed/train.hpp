#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "magicpaint/core/types.hpp"
#include "magicpaint/embed/network.hpp"
#include "magicpaint/embed/similarity.hpp"

namespace magicpaint {

struct PixelPair {
  std::uint32_t i;
  std::uint32_t j;
  bool same_class;
  friend bool operator==(const PixelPair&, const PixelPair&) = default;
};

// Draws `count` pairs of labeled pixels. Half are same-class and half
// different-class whenever the map has at least two labels; otherwise all
// pairs are same-class. Unlabeled (0) pixels never take part.
template <typename Rng>
std::vector<PixelPair> sample_pairs(const LabelMap& labels, std::size_t count, Rng& rng) {
  std::vector<std::uint32_t> labeled;
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k] != kUnlabeled) labeled.push_back(static_cast<std::uint32_t>(k));
  if (labeled.size() < 2) throw Error("need at least 2 labeled pixels");

  std::vector<LabelId> classes;
  std::vector<std::vector<std::uint32_t>> members;
  {
    std::vector<int> slot(65536, -1);
    for (auto k : labeled) {
      const LabelId l = labels[k];
      if (slot[l] < 0) {
        slot[l] = static_cast<int>(classes.size());
        classes.push_back(l);
        members.emplace_back();
      }
      members[slot[l]].push_back(k);
    }
  }
  auto pick = [&rng](const std::vector<std::uint32_t>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto class_of = [&](std::uint32_t k) {
    return static_cast<std::size_t>(std::find(classes.begin(), classes.end(), labels[k]) - classes.begin());
  };

  std::vector<PixelPair> pairs;
  pairs.reserve(count);
  const std::size_t positives = classes.size() >= 2 ? count / 2 : count;
  for (std::size_t n = 0; n < positives; ++n) {
    const std::uint32_t i = pick(labeled);
    pairs.push_back({i, pick(members[class_of(i)]), true});
  }
  while (pairs.size() < count) {
    const std::uint32_t i = pick(labeled);
    const std::size_t ci = class_of(i);
    std::size_t cj = std::uniform_int_distribution<std::size_t>(0, classes.size() - 2)(rng);
    if (cj >= ci) ++cj;
    pairs.push_back({i, pick(members[cj]), false});
  }
  return pairs;
}

struct TrainConfig {
  int images_per_batch = 5;
  int pairs_per_image = 500;
  double learning_rate = 1e-4;
  // images (and labels) are resized to this before training; 0 keeps size
  int image_width = 400;
  int image_height = 300;
  int steps = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (images_per_batch < 1 || pairs_per_image < 1 || steps < 0) throw Error("train counts must be positive");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be > 0");
    if (image_width < 0 || image_height < 0) throw Error("train image size must be >= 0");
  }
};

struct TrainSample {
  Image image;
  LabelMap labels;
};

inline Image resize_bilinear(const Image& img, int width, int height) {
  if (img.width() == width && img.height() == height) return img;
  Image out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      auto mix = [&](auto channel) {
        const double top = (1 - tx) * channel(img.at(x0, y0)) + tx * channel(img.at(x1, y0));
        const double bot = (1 - tx) * channel(img.at(x0, y1)) + tx * channel(img.at(x1, y1));
        return static_cast<std::uint8_t>(std::lround(std::clamp((1 - ty) * top + ty * bot, 0.0, 255.0)));
      };
      out.at(x, y) = Rgb{mix([](Rgb c) { return double(c.r); }), mix([](Rgb c) { return double(c.g); }),
                         mix([](Rgb c) { return double(c.b); })};
    }
  }
  return out;
}

inline LabelMap resize_nearest(const LabelMap& map, int width, int height) {
  if (map.width() == width && map.height() == height) return map;
  LabelMap out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(map.height() - 1, static_cast<int>((y + 0.5) * map.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(map.width() - 1, static_cast<int>((x + 0.5) * map.width() / width));
      out.at(x, y) = map.at(sx, sy);
    }
  }
  return out;
}

template <typename T>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<ConvLayer<T>>& params, const std::vector<ConvLayer<T>>& grads) {
    if (m_.empty()) {
      for (const auto& l : params) {
        m_.emplace_back(l.weight.size() + l.bias.size(), 0.0);
        v_.emplace_back(l.weight.size() + l.bias.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto update = [&](std::vector<T>& p, const std::vector<T>& g, std::size_t offset) {
        for (std::size_t k = 0; k < p.size(); ++k) {
          double& m = m_[i][offset + k];
          double& v = v_[i][offset + k];
          const double gk = static_cast<double>(g[k]);
          m = beta1_ * m + (1.0 - beta1_) * gk;
          v = beta2_ * v + (1.0 - beta2_) * gk * gk;
          p[k] -= static_cast<T>(lr_ * (m / c1) / (std::sqrt(v / c2) + eps_));
        }
      };
      update(params[i].weight, grads[i].weight, 0);
      update(params[i].bias, grads[i].bias, params[i].weight.size());
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Mean pair loss over `pairs` of one image, and optionally dLoss/dEmbedding
// (scaled by `grad_scale`) written into `grad`.
template <typename T>
double pair_loss_and_grad(const Tensor<T>& emb, const std::vector<PixelPair>& pairs, Tensor<T>* grad,
                          double grad_scale) {
  const std::size_t plane = emb.plane();
  double total = 0.0;
  for (const auto& p : pairs) {
    double d = 0.0;
    for (int c = 0; c < emb.channels; ++c) {
      const double diff = static_cast<double>(emb.data[c * plane + p.i]) - emb.data[c * plane + p.j];
      d += diff * diff;
    }
    const PairLoss pl = pair_loss_from_sqdist(d, p.same_class);
    total += pl.loss;
    if (grad && p.i != p.j) {
      for (int c = 0; c < emb.channels; ++c) {
        const double diff = static_cast<double>(emb.data[c * plane + p.i]) - emb.data[c * plane + p.j];
        const T g = static_cast<T>(grad_scale * pl.dloss_dsqdist * 2.0 * diff);
        grad->data[c * plane + p.i] += g;
        grad->data[c * plane + p.j] -= g;
      }
    }
  }
  return pairs.empty() ? 0.0 : total / static_cast<double>(pairs.size());
}

struct TrainLog {
  std::vector<double> step_loss;  // mean pair loss of each step's batch, before its update
};

namespace detail {
inline std::vector<TrainSample> prepare_dataset(const std::vector<TrainSample>& dataset, const TrainConfig& cfg) {
  std::vector<TrainSample> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset) {
    if (!s.labels.same_shape(s.image)) throw Error("label map does not match image");
    if (cfg.image_width > 0 && cfg.image_height > 0)
      out.push_back({resize_bilinear(s.image, cfg.image_width, cfg.image_height),
                     resize_nearest(s.labels, cfg.image_width, cfg.image_height)});
    else
      out.push_back(s);
  }
  return out;
}
}  // namespace detail

// Minimizes the mean pair loss with Adam. Each step samples
// `images_per_batch` images and `pairs_per_image` pairs per image.
template <typename T = float>
EmbeddingNet<T> train_embedding(const std::vector<TrainSample>& dataset, const TrainConfig& cfg,
                                const EmbeddingNetConfig& net_cfg, TrainLog* log = nullptr,
                                const std::function<void(int, double)>& on_step = {}) {
  cfg.validate();
  net_cfg.validate();
  if (dataset.empty()) throw Error("empty dataset");
  const auto data = detail::prepare_dataset(dataset, cfg);
  std::mt19937_64 rng(cfg.seed);
  EmbeddingNet<T> net(net_cfg, cfg.seed);
  Adam<T> adam(cfg.learning_rate);
  const double pair_total = static_cast<double>(cfg.images_per_batch) * cfg.pairs_per_image;
  for (int step = 0; step < cfg.steps; ++step) {
    auto grads = net.zero_gradients();
    double loss = 0.0;
    for (int b = 0; b < cfg.images_per_batch; ++b) {
      const auto& sample = data[std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng)];
      const auto pairs = sample_pairs(sample.labels, static_cast<std::size_t>(cfg.pairs_per_image), rng);
      auto acts = net.forward_train(image_to_tensor<T>(sample.image));
      const auto& emb = acts.embedding();
      Tensor<T> grad(emb.channels, emb.height, emb.width);
      loss += pair_loss_and_grad(emb, pairs, &grad, 1.0 / pair_total) * cfg.pairs_per_image;
      net.backward(acts, std::move(grad), grads);
    }
    loss /= pair_total;
    if (log) log->step_loss.push_back(loss);
    if (on_step) on_step(step, loss);
    adam.step(net.layers(), grads);
  }
  return net;
}

// Mean pair loss and mean similarity per pair type over a fixed, seeded pair
// sample; used to monitor training and held-out behavior.
struct PairStats {
  double mean_loss = 0.0;
  double mean_sigma_same = 0.0;
  double mean_sigma_diff = 0.0;
};

template <typename T>
PairStats evaluate_pairs(const EmbeddingNet<T>& net, const std::vector<TrainSample>& dataset, int pairs_per_image,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PairStats st;
  std::size_t n = 0, ns = 0, nd = 0;
  for (const auto& s : dataset) {
    const auto pairs = sample_pairs(s.labels, static_cast<std::size_t>(pairs_per_image), rng);
    const auto field = net.forward(s.image);
    for (const auto& p : pairs) {
      const double d = squared_distance(field.at(p.i), field.at(p.j));
      st.mean_loss += pair_loss_from_sqdist(d, p.same_class).loss;
      const double sigma = similarity_from_sqdist(d);
      (p.same_class ? st.mean_sigma_same : st.mean_sigma_diff) += sigma;
      ++(p.same_class ? ns : nd);
      ++n;
    }
  }
  if (n) st.mean_loss /= n;
  if (ns) st.mean_sigma_same /= ns;
  if (nd) st.mean_sigma_diff /= nd;
  return st;
}

}  // namespace magicpaint
