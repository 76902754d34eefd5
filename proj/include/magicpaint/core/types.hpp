#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace magicpaint {

// All library failures surface as this exception; `what()` carries a short
// lowercase reason ("malformed PNG", "non-monotonic timestamps", ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 0 is reserved for "unlabeled / not confident".
using LabelId = std::uint16_t;
inline constexpr LabelId kUnlabeled = 0;

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point& a, const Point& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {}) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw Error("image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Image(int width, int height, std::vector<Rgb> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) throw Error("image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height)
      throw Error("pixel count does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Rgb& at(int x, int y) { return pixels_[index(x, y)]; }
  const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
  Rgb& operator[](std::size_t k) { return pixels_[k]; }
  const Rgb& operator[](std::size_t k) const { return pixels_[k]; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  const std::vector<Rgb>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height, LabelId fill = kUnlabeled) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw Error("label map dimensions must be positive");
    labels_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  LabelMap(int width, int height, std::vector<LabelId> labels)
      : width_(width), height_(height), labels_(std::move(labels)) {
    if (width < 1 || height < 1) throw Error("label map dimensions must be positive");
    if (labels_.size() != static_cast<std::size_t>(width) * height)
      throw Error("label count does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool same_shape(const Image& img) const { return img.width() == width_ && img.height() == height_; }
  bool same_shape(const LabelMap& o) const { return o.width_ == width_ && o.height_ == height_; }

  LabelId& at(int x, int y) { return labels_[index(x, y)]; }
  LabelId at(int x, int y) const { return labels_[index(x, y)]; }
  LabelId& operator[](std::size_t k) { return labels_[k]; }
  LabelId operator[](std::size_t k) const { return labels_[k]; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  const std::vector<LabelId>& labels() const { return labels_; }
  std::vector<LabelId>& labels() { return labels_; }

  std::size_t count_nonzero() const {
    std::size_t n = 0;
    for (LabelId l : labels_) n += l != kUnlabeled;
    return n;
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<LabelId> labels_;
};

// Per-pixel segment ids (0 = void) plus segment metadata.
struct GroundTruth {
  LabelMap segments;
  std::map<LabelId, std::string> classes;
  // annotation label -> gt segment id, when the annotator was bound to the
  // reference segmentation
  std::optional<std::map<LabelId, LabelId>> label_binding;

  void validate() const {
    for (LabelId s : segments.labels())
      if (s != 0 && !classes.contains(s))
        throw Error("ground-truth segment " + std::to_string(s) + " has no class entry");
  }

  // Number of distinct non-void segments present in the map.
  std::size_t segment_count() const {
    std::vector<bool> seen(65536, false);
    std::size_t n = 0;
    for (LabelId s : segments.labels())
      if (s != 0 && !seen[s]) seen[s] = true, ++n;
    return n;
  }

  // Per-pixel class map where classes are renumbered 1..C by sorted name.
  LabelMap class_map() const {
    std::map<std::string, LabelId> ids;
    for (const auto& [seg, name] : classes) ids.emplace(name, 0);
    LabelId next = 1;
    for (auto& [name, id] : ids) id = next++;
    LabelMap out(segments.width(), segments.height());
    for (std::size_t k = 0; k < out.size(); ++k) {
      LabelId s = segments[k];
      if (s == 0) continue;
      auto it = classes.find(s);
      if (it != classes.end()) out[k] = ids.at(it->second);
    }
    return out;
  }
};

}  // namespace magicpaint
