#pragma once

// Fully convolutional pixel-embedding network: stride-1 3x3 dilated
// convolutions with "same" padding, ReLU between layers and a linear final
// projection. Resolution is preserved end to end. Convolutions are lowered to
// GEMMs (im2col over horizontal bands) so large images fit in memory.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "magicpaint/core/types.hpp"
#include "magicpaint/embed/field.hpp"

namespace magicpaint {

struct EmbeddingNetConfig {
  std::vector<int> widths{32, 64, 128, 256, 256, 256};
  // one entry per layer, including the final projection
  std::vector<int> dilations{1, 1, 2, 4, 8, 16, 1};
  int output_dim = 32;
  int kernel_size = 3;
  int stride = 1;

  std::size_t layer_count() const { return widths.size() + 1; }

  void validate() const {
    if (kernel_size != 3 || stride != 1) throw Error("only 3x3 stride-1 convolutions are supported");
    if (output_dim < 1) throw Error("output dim must be >= 1");
    for (int w : widths)
      if (w < 1) throw Error("layer widths must be >= 1");
    if (dilations.size() != layer_count()) throw Error("need one dilation per layer");
    for (int d : dilations)
      if (d < 1) throw Error("dilations must be >= 1");
  }

  friend bool operator==(const EmbeddingNetConfig&, const EmbeddingNetConfig&) = default;
};

// Channel-major C x H x W tensor.
template <typename T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, T(0)) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  T& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  T at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
};

template <typename T>
Tensor<T> image_to_tensor(const Image& img) {
  Tensor<T> t(3, img.height(), img.width());
  const std::size_t plane = t.plane();
  for (std::size_t k = 0; k < img.size(); ++k) {
    t.data[k] = static_cast<T>(img[k].r) / T(255) - T(0.5);
    t.data[plane + k] = static_cast<T>(img[k].g) / T(255) - T(0.5);
    t.data[2 * plane + k] = static_cast<T>(img[k].b) / T(255) - T(0.5);
  }
  return t;
}

template <typename T>
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int dilation = 1;
  std::vector<T> weight;  // [out][in][3][3]
  std::vector<T> bias;    // [out]
};

template <typename T>
class EmbeddingNet {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;
  using ConstMatrixMap = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

  // Per-layer outputs of a training forward pass; outputs[0] is the input.
  struct Activations {
    std::vector<Tensor<T>> outputs;
    const Tensor<T>& embedding() const { return outputs.back(); }
  };

  EmbeddingNet() = default;

  // He-scaled normal init for ReLU layers, 1/fan_in variance for the final
  // projection; zero biases.
  EmbeddingNet(EmbeddingNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(seed);
    int in = 3;
    for (std::size_t i = 0; i < config_.layer_count(); ++i) {
      const bool last = i + 1 == config_.layer_count();
      const int out = last ? config_.output_dim : config_.widths[i];
      ConvLayer<T> layer{in, out, config_.dilations[i], {}, {}};
      const double fan_in = 9.0 * in;
      std::normal_distribution<double> dist(0.0, std::sqrt((last ? 1.0 : 2.0) / fan_in));
      layer.weight.resize(static_cast<std::size_t>(out) * in * 9);
      for (auto& w : layer.weight) w = static_cast<T>(dist(rng));
      layer.bias.assign(out, T(0));
      layers_.push_back(std::move(layer));
      in = out;
    }
  }

  // Builds a network around existing parameters; shapes are checked.
  EmbeddingNet(EmbeddingNetConfig config, std::vector<ConvLayer<T>> layers)
      : config_(std::move(config)), layers_(std::move(layers)) {
    config_.validate();
    if (layers_.size() != config_.layer_count()) throw Error("shape mismatch: layer count");
    int in = 3;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      const int out = i + 1 == layers_.size() ? config_.output_dim : config_.widths[i];
      if (l.in_channels != in || l.out_channels != out || l.dilation != config_.dilations[i] ||
          l.weight.size() != static_cast<std::size_t>(out) * in * 9 || l.bias.size() != static_cast<std::size_t>(out))
        throw Error("shape mismatch: layer " + std::to_string(i));
      in = out;
    }
  }

  const EmbeddingNetConfig& config() const { return config_; }
  const std::vector<ConvLayer<T>>& layers() const { return layers_; }
  std::vector<ConvLayer<T>>& layers() { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  // Inference path: keeps only the current activation.
  EmbeddingField forward(const Image& img) const {
    Tensor<T> x = image_to_tensor<T>(img);
    for (std::size_t i = 0; i < layers_.size(); ++i) x = conv_forward(layers_[i], x, i + 1 < layers_.size());
    EmbeddingField field(img.width(), img.height(), config_.output_dim);
    const std::size_t plane = x.plane();
    for (std::size_t k = 0; k < plane; ++k) {
      auto v = field.at(k);
      for (int c = 0; c < x.channels; ++c) v[c] = static_cast<float>(x.data[c * plane + k]);
    }
    return field;
  }

  Activations forward_train(Tensor<T> input) const {
    Activations acts;
    acts.outputs.reserve(layers_.size() + 1);
    acts.outputs.push_back(std::move(input));
    for (std::size_t i = 0; i < layers_.size(); ++i)
      acts.outputs.push_back(conv_forward(layers_[i], acts.outputs.back(), i + 1 < layers_.size()));
    return acts;
  }

  // Accumulates parameter gradients into `grads` (same layout as layers())
  // given dLoss/dEmbedding.
  void backward(const Activations& acts, Tensor<T> grad, std::vector<ConvLayer<T>>& grads) const {
    if (grads.size() != layers_.size()) grads = zero_gradients();
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const bool relu = i + 1 < layers_.size();
      if (relu) {
        const auto& out = acts.outputs[i + 1];
        for (std::size_t k = 0; k < grad.data.size(); ++k)
          if (out.data[k] <= T(0)) grad.data[k] = T(0);
      }
      grad = conv_backward(layers_[i], acts.outputs[i], grad, grads[i], i > 0);
    }
  }

  std::vector<ConvLayer<T>> zero_gradients() const {
    std::vector<ConvLayer<T>> g = layers_;
    for (auto& l : g) {
      std::fill(l.weight.begin(), l.weight.end(), T(0));
      std::fill(l.bias.begin(), l.bias.end(), T(0));
    }
    return g;
  }

 private:
  static int band_rows(int in_channels, int width, int height) {
    const std::size_t budget = std::size_t{1} << 24;  // col-buffer elements
    const std::size_t per_row = static_cast<std::size_t>(in_channels) * 9 * width;
    return std::clamp(static_cast<int>(budget / std::max<std::size_t>(per_row, 1)), 1, height);
  }

  static void im2col(const Tensor<T>& in, int dilation, int y0, int y1, Matrix& col) {
    const int w = in.width;
    const int h = in.height;
    const int cols = (y1 - y0) * w;
    col.resize(static_cast<Eigen::Index>(in.channels) * 9, cols);
    for (int c = 0; c < in.channels; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T* row = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * cols;
          const int oy = (ky - 1) * dilation;
          const int ox = (kx - 1) * dilation;
          for (int y = y0; y < y1; ++y) {
            T* dst = row + static_cast<std::size_t>(y - y0) * w;
            const int sy = y + oy;
            if (sy < 0 || sy >= h) {
              std::fill(dst, dst + w, T(0));
              continue;
            }
            const T* src = in.data.data() + c * in.plane() + static_cast<std::size_t>(sy) * w;
            for (int x = 0; x < w; ++x) {
              const int sx = x + ox;
              dst[x] = (sx >= 0 && sx < w) ? src[sx] : T(0);
            }
          }
        }
      }
    }
  }

  static void col2im_add(const Matrix& col, int dilation, int y0, int y1, Tensor<T>& out) {
    const int w = out.width;
    const int h = out.height;
    const int cols = (y1 - y0) * w;
    for (int c = 0; c < out.channels; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T* row = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * cols;
          const int oy = (ky - 1) * dilation;
          const int ox = (kx - 1) * dilation;
          for (int y = y0; y < y1; ++y) {
            const int sy = y + oy;
            if (sy < 0 || sy >= h) continue;
            const T* src = row + static_cast<std::size_t>(y - y0) * w;
            T* dst = out.data.data() + c * out.plane() + static_cast<std::size_t>(sy) * w;
            for (int x = 0; x < w; ++x) {
              const int sx = x + ox;
              if (sx >= 0 && sx < w) dst[sx] += src[x];
            }
          }
        }
      }
    }
  }

  static Tensor<T> conv_forward(const ConvLayer<T>& layer, const Tensor<T>& in, bool relu) {
    if (in.channels != layer.in_channels) throw Error("shape mismatch: input channels");
    Tensor<T> out(layer.out_channels, in.height, in.width);
    ConstMatrixMap weight(layer.weight.data(), layer.out_channels, static_cast<Eigen::Index>(layer.in_channels) * 9,
                          Eigen::OuterStride<>(layer.in_channels * 9));
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(layer.bias.data(), layer.out_channels);
    const int band = band_rows(in.channels, in.width, in.height);
    Matrix col;
    for (int y0 = 0; y0 < in.height; y0 += band) {
      const int y1 = std::min(in.height, y0 + band);
      im2col(in, layer.dilation, y0, y1, col);
      MatrixMap dst(out.data.data() + static_cast<std::size_t>(y0) * in.width, layer.out_channels,
                    static_cast<Eigen::Index>(y1 - y0) * in.width, Eigen::OuterStride<>(out.plane()));
      dst.noalias() = weight * col;
      dst.colwise() += bias;
      if (relu) dst = dst.cwiseMax(T(0));
    }
    return out;
  }

  // Returns dLoss/dInput (skipped when not needed) and accumulates into g.
  static Tensor<T> conv_backward(const ConvLayer<T>& layer, const Tensor<T>& in, const Tensor<T>& grad_out,
                                 ConvLayer<T>& g, bool need_input_grad) {
    Tensor<T> grad_in;
    if (need_input_grad) grad_in = Tensor<T>(in.channels, in.height, in.width);
    ConstMatrixMap weight(layer.weight.data(), layer.out_channels, static_cast<Eigen::Index>(layer.in_channels) * 9,
                          Eigen::OuterStride<>(layer.in_channels * 9));
    MatrixMap gweight(g.weight.data(), layer.out_channels, static_cast<Eigen::Index>(layer.in_channels) * 9,
                      Eigen::OuterStride<>(layer.in_channels * 9));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gbias(g.bias.data(), layer.out_channels);
    const int band = band_rows(in.channels, in.width, in.height);
    Matrix col;
    Matrix dcol;
    for (int y0 = 0; y0 < in.height; y0 += band) {
      const int y1 = std::min(in.height, y0 + band);
      im2col(in, layer.dilation, y0, y1, col);
      ConstMatrixMap dout(grad_out.data.data() + static_cast<std::size_t>(y0) * in.width, layer.out_channels,
                          static_cast<Eigen::Index>(y1 - y0) * in.width, Eigen::OuterStride<>(grad_out.plane()));
      gweight.noalias() += dout * col.transpose();
      gbias += dout.rowwise().sum();
      if (need_input_grad) {
        dcol.noalias() = weight.transpose() * dout;
        col2im_add(dcol, layer.dilation, y0, y1, grad_in);
      }
    }
    return grad_in;
  }

  EmbeddingNetConfig config_;
  std::vector<ConvLayer<T>> layers_;
};

}  // namespace magicpaint
