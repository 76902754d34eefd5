#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "magicpaint/core/types.hpp"

namespace magicpaint {

// Per-pixel embedding vectors, row-major, `dim` floats per pixel.
class EmbeddingField {
 public:
  EmbeddingField() = default;
  EmbeddingField(int width, int height, int dim)
      : width_(width), height_(height), dim_(dim), data_(static_cast<std::size_t>(width) * height * dim, 0.0f) {
    if (width < 1 || height < 1 || dim < 1) throw Error("embedding field dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int dim() const { return dim_; }
  std::size_t pixels() const { return static_cast<std::size_t>(width_) * height_; }

  std::span<float> at(std::size_t k) { return {data_.data() + k * dim_, static_cast<std::size_t>(dim_)}; }
  std::span<const float> at(std::size_t k) const {
    return {data_.data() + k * dim_, static_cast<std::size_t>(dim_)};
  }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const EmbeddingField&, const EmbeddingField&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int dim_ = 0;
  std::vector<float> data_;
};

template <typename A, typename B>
double squared_distance(std::span<A> a, std::span<B> b) {
  if (a.size() != b.size()) throw Error("embedding dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

}  // namespace magicpaint
