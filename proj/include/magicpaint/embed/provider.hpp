#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "magicpaint/embed/histogram.hpp"
#include "magicpaint/embed/network.hpp"
#include "magicpaint/embed/weights_io.hpp"

namespace magicpaint {

// Source of per-pixel embeddings for the assistant.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Stable identifier; two providers with equal ids produce equal fields.
  virtual std::string id() const = 0;
  virtual EmbeddingField compute(const Image& img) const = 0;
};

class HistogramProvider final : public EmbeddingProvider {
 public:
  explicit HistogramProvider(SlicParams params = {}) : params_(params) {}
  std::string id() const override {
    return "hist:" + std::to_string(params_.n_segments) + ":" + std::to_string(params_.compactness) + ":" +
           std::to_string(params_.iterations);
  }
  EmbeddingField compute(const Image& img) const override { return histogram_embedding(img, params_); }

 private:
  SlicParams params_;
};

class NeuralProvider final : public EmbeddingProvider {
 public:
  NeuralProvider(EmbeddingNet<float> net, std::string tag) : net_(std::move(net)), tag_(std::move(tag)) {}
  std::string id() const override { return "neural:" + tag_; }
  EmbeddingField compute(const Image& img) const override { return net_.forward(img); }
  const EmbeddingNet<float>& net() const { return net_; }

 private:
  EmbeddingNet<float> net_;
  std::string tag_;
};

enum class EmbeddingKind { Histogram, Neural };

struct EmbeddingSpec {
  EmbeddingKind kind = EmbeddingKind::Histogram;
  SlicParams slic;
  std::filesystem::path weights;  // neural only
};

inline std::shared_ptr<const EmbeddingProvider> make_provider(const EmbeddingSpec& spec) {
  if (spec.kind == EmbeddingKind::Histogram) return std::make_shared<HistogramProvider>(spec.slic);
  if (spec.weights.empty()) throw Error("neural embedding requires a weights file");
  return std::make_shared<NeuralProvider>(load_weights<float>(spec.weights), spec.weights.string());
}

}  // namespace magicpaint
