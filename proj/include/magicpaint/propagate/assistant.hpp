#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "magicpaint/embed/provider.hpp"
#include "magicpaint/paint/state.hpp"
#include "magicpaint/propagate/densecrf.hpp"
#include "magicpaint/propagate/distance_maps.hpp"

namespace magicpaint {

enum class Inference { NearestNeighbor, DenseCrf };

inline const char* to_string(Inference i) { return i == Inference::NearestNeighbor ? "1nn" : "densecrf"; }

inline Inference parse_inference(std::string_view s) {
  if (s == "1nn") return Inference::NearestNeighbor;
  if (s == "densecrf") return Inference::DenseCrf;
  throw Error("unknown inference: " + std::string(s));
}

struct AssistantConfig {
  EmbeddingSpec embedding;
  Inference inference = Inference::DenseCrf;
  CrfParams crf;
  FilterMethod filter = FilterMethod::Auto;
  std::optional<double> d0;  // background distance; per-image default when unset
  std::size_t max_support = 5000;
};

// New predicted layer from the current reference layer and frozen set.
// Only pixels with reference == 0 are written; pixels currently predicted as a
// frozen class keep their label. With no active class the previous predicted
// layer is returned unchanged.
inline LabelMap propagate(const AnnotationState& state, const Image& img, const EmbeddingField& field, double d0,
                          const AssistantConfig& cfg) {
  if (img.width() != state.width() || img.height() != state.height()) throw Error("image does not match state");
  const auto present = state.reference_labels();
  if (present.empty()) throw Error("empty reference");
  std::vector<LabelId> active;
  for (LabelId l : present)
    if (!state.frozen.contains(l)) active.push_back(l);
  if (active.empty()) return state.predicted;

  const DistanceMaps dm = compute_distance_maps(field, state.reference, active, d0, cfg.max_support);
  LabelMap inferred = cfg.inference == Inference::NearestNeighbor
                          ? infer_1nn(dm)
                          : infer_densecrf(dm, img, cfg.crf, cfg.filter).labels;

  LabelMap out = state.predicted;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (state.reference[k] != kUnlabeled) continue;
    if (out[k] != kUnlabeled && state.frozen.contains(out[k])) continue;
    out[k] = inferred[k];
  }
  return out;
}

inline std::uint64_t image_hash(const Image& img) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  mix(static_cast<std::uint64_t>(img.width()));
  mix(static_cast<std::uint64_t>(img.height()));
  for (const Rgb& p : img.pixels()) mix((std::uint64_t{p.r} << 16) | (std::uint64_t{p.g} << 8) | p.b);
  return h;
}

// Holds an embedding provider and caches the per-image embedding field and
// background distance. Safe to share between threads.
class Assistant {
 public:
  static constexpr std::size_t kCacheSize = 16;

  explicit Assistant(AssistantConfig cfg) : cfg_(std::move(cfg)), provider_(make_provider(cfg_.embedding)) {}
  Assistant(AssistantConfig cfg, std::shared_ptr<const EmbeddingProvider> provider)
      : cfg_(std::move(cfg)), provider_(std::move(provider)) {
    if (!provider_) throw Error("null embedding provider");
  }

  const AssistantConfig& config() const { return cfg_; }
  const EmbeddingProvider& provider() const { return *provider_; }

  struct Prepared {
    std::shared_ptr<const EmbeddingField> field;
    double d0 = 0.0;
  };

  Prepared prepare(const Image& img) const {
    const std::uint64_t key = image_hash(img);
    {
      std::lock_guard lock(mutex_);
      for (auto it = cache_.begin(); it != cache_.end(); ++it)
        if (it->first == key) {
          cache_.splice(cache_.begin(), cache_, it);
          return it->second;
        }
    }
    Prepared p;
    auto field = std::make_shared<EmbeddingField>(provider_->compute(img));
    p.d0 = cfg_.d0 ? *cfg_.d0 : default_background_distance(*field);
    p.field = std::move(field);
    std::lock_guard lock(mutex_);
    cache_.emplace_front(key, p);
    if (cache_.size() > kCacheSize) cache_.pop_back();
    return p;
  }

  LabelMap propagate(const AnnotationState& state, const Image& img) const {
    const Prepared p = prepare(img);
    return magicpaint::propagate(state, img, *p.field, p.d0, cfg_);
  }

 private:
  AssistantConfig cfg_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  mutable std::mutex mutex_;
  mutable std::list<std::pair<std::uint64_t, Prepared>> cache_;
};

}  // namespace magicpaint
