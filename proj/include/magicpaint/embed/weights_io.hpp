#pragma once

// Weights container (see docs/weights_format.md):
//   bytes 0..3   magic "MPWT"
//   bytes 4..7   u32 LE format version (1)
//   bytes 8..11  u32 LE manifest length N
//   next N bytes UTF-8 JSON manifest: dtype, network config, tensor list
//   then the tensors' raw little-endian values, in manifest order

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "magicpaint/core/png_io.hpp"
#include "magicpaint/embed/network.hpp"

namespace magicpaint {

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint32_t get_u32(std::span<const unsigned char> in, std::size_t at) {
  if (at + 4 > in.size()) throw Error("truncated weights file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

template <typename T>
void put_values(std::vector<unsigned char>& out, std::span<const T> values) {
  for (T v : values) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
  }
}

template <typename T>
void get_values(std::span<const unsigned char> in, std::size_t& at, std::span<T> values) {
  if (at + values.size() * sizeof(T) > in.size()) throw Error("truncated weights file");
  for (T& v : values) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, in.data() + at, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    at += sizeof(T);
  }
}

template <typename T>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "f32" : "f64";
}

}  // namespace detail

template <typename T>
std::vector<unsigned char> encode_weights(const EmbeddingNet<T>& net) {
  nlohmann::ordered_json manifest;
  manifest["dtype"] = detail::dtype_name<T>();
  manifest["config"] = {{"widths", net.config().widths},
                        {"dilations", net.config().dilations},
                        {"output_dim", net.config().output_dim},
                        {"kernel_size", net.config().kernel_size},
                        {"stride", net.config().stride}};
  auto tensors = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    tensors.push_back({{"name", "layer" + std::to_string(i) + ".weight"},
                       {"shape", {l.out_channels, l.in_channels, 3, 3}},
                       {"dilation", l.dilation}});
    tensors.push_back({{"name", "layer" + std::to_string(i) + ".bias"}, {"shape", {l.out_channels}}});
  }
  manifest["tensors"] = std::move(tensors);
  const std::string text = manifest.dump();

  std::vector<unsigned char> out{'M', 'P', 'W', 'T'};
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& l : net.layers()) {
    detail::put_values<T>(out, l.weight);
    detail::put_values<T>(out, l.bias);
  }
  return out;
}

template <typename T>
EmbeddingNet<T> decode_weights(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "MPWT", 4) != 0) throw Error("not a weights file");
  if (detail::get_u32(bytes, 4) != 1) throw Error("unsupported weights format version");
  const std::uint32_t len = detail::get_u32(bytes, 8);
  if (12 + static_cast<std::size_t>(len) > bytes.size()) throw Error("truncated weights file");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed weights manifest: ") + e.what());
  }
  if (manifest.value("dtype", "") != detail::dtype_name<T>()) throw Error("weights dtype mismatch");
  EmbeddingNetConfig config;
  const auto& c = manifest.at("config");
  config.widths = c.at("widths").get<std::vector<int>>();
  config.dilations = c.at("dilations").get<std::vector<int>>();
  config.output_dim = c.at("output_dim").get<int>();
  config.kernel_size = c.value("kernel_size", 3);
  config.stride = c.value("stride", 1);
  config.validate();

  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != 2 * config.layer_count()) throw Error("shape mismatch: tensor count");
  std::vector<ConvLayer<T>> layers;
  std::size_t at = 12 + len;
  for (std::size_t i = 0; i < config.layer_count(); ++i) {
    const auto wshape = tensors[2 * i].at("shape").get<std::vector<int>>();
    const auto bshape = tensors[2 * i + 1].at("shape").get<std::vector<int>>();
    if (wshape.size() != 4 || bshape.size() != 1 || wshape[2] != 3 || wshape[3] != 3 || bshape[0] != wshape[0])
      throw Error("shape mismatch: layer " + std::to_string(i));
    ConvLayer<T> l{wshape[1], wshape[0], config.dilations[i], {}, {}};
    l.weight.resize(static_cast<std::size_t>(wshape[0]) * wshape[1] * 9);
    l.bias.resize(static_cast<std::size_t>(bshape[0]));
    detail::get_values<T>(bytes, at, l.weight);
    detail::get_values<T>(bytes, at, l.bias);
    layers.push_back(std::move(l));
  }
  if (at != bytes.size()) throw Error("trailing bytes in weights file");
  return EmbeddingNet<T>(std::move(config), std::move(layers));
}

template <typename T>
void save_weights(const EmbeddingNet<T>& net, const std::filesystem::path& path) {
  write_file_bytes(path, encode_weights(net));
}

template <typename T>
EmbeddingNet<T> load_weights(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("missing weights file: " + path.string());
  return decode_weights<T>(read_file_bytes(path));
}

}  // namespace magicpaint
