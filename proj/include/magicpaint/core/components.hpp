#pragma once

#include <cstdint>
#include <vector>

#include "magicpaint/core/types.hpp"

namespace magicpaint {

enum class Connectivity { Four = 4, Eight = 8 };

struct Components {
  // per-pixel component id, dense from 1 in raster order of first pixel
  std::vector<std::uint32_t> ids;
  // label of component i is labels[i - 1]; label 0 marks an unlabeled region
  std::vector<LabelId> labels;

  std::size_t count() const { return labels.size(); }
  bool unlabeled(std::uint32_t id) const { return labels[id - 1] == kUnlabeled; }
};

inline Components connected_components(const LabelMap& map, Connectivity conn = Connectivity::Four) {
  const int w = map.width();
  const int h = map.height();
  Components out;
  out.ids.assign(map.size(), 0);
  std::vector<std::size_t> stack;
  const int n8[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
  const int nn = conn == Connectivity::Four ? 4 : 8;
  for (std::size_t start = 0; start < map.size(); ++start) {
    if (out.ids[start] != 0) continue;
    const LabelId label = map[start];
    out.labels.push_back(label);
    const auto id = static_cast<std::uint32_t>(out.labels.size());
    out.ids[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(k % w);
      const int y = static_cast<int>(k / w);
      for (int i = 0; i < nn; ++i) {
        const int nx = x + n8[i][0];
        const int ny = y + n8[i][1];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (out.ids[q] == 0 && map[q] == label) {
          out.ids[q] = id;
          stack.push_back(q);
        }
      }
    }
  }
  return out;
}

}  // namespace magicpaint
