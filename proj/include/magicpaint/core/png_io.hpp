#pragma once

// PNG codecs for RGB images and 16-bit label maps, plus the ground-truth
// sidecar document. libpng's classic API is used so that 16-bit samples pass
// through without gamma handling.

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magicpaint/core/types.hpp"

namespace magicpaint {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  // write-then-rename so readers never observe a partial file
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write file: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace detail {

struct PngRaw {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int channels = 0;
  std::vector<unsigned char> rows;  // packed, big-endian 16-bit samples
  std::size_t rowbytes = 0;
};

struct PngMemReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

inline void png_mem_read(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<PngMemReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->size) png_error(png, "read past end");
  std::memcpy(out, r->data + r->pos, n);
  r->pos += n;
}

inline void png_silent_warning(png_structp, png_const_charp) {}

[[noreturn]] inline void png_silent_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

// Returns false on any decode failure.
inline bool decode_png_raw(std::span<const unsigned char> bytes, PngRaw& raw) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) return false;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_silent_error, png_silent_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  PngMemReader reader{bytes.data(), bytes.size(), 0};
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &reader, png_mem_read);
  png_read_info(png, info);
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.bit_depth = png_get_bit_depth(png, info);
  raw.color_type = png_get_color_type(png, info);
  if (raw.color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (raw.bit_depth < 8 && raw.color_type == PNG_COLOR_TYPE_GRAY) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  raw.channels = png_get_channels(png, info);
  raw.rowbytes = png_get_rowbytes(png, info);
  raw.rows.resize(raw.rowbytes * static_cast<std::size_t>(raw.height));
  row_ptrs.resize(static_cast<std::size_t>(raw.height));
  for (int y = 0; y < raw.height; ++y) row_ptrs[y] = raw.rows.data() + raw.rowbytes * y;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct PngMemWriter {
  std::vector<unsigned char>* out;
};

inline void png_mem_write(png_structp png, png_bytep data, png_size_t n) {
  auto* w = static_cast<PngMemWriter*>(png_get_io_ptr(png));
  w->out->insert(w->out->end(), data, data + n);
}

inline void png_mem_flush(png_structp) {}

inline std::vector<unsigned char> encode_png_raw(int width, int height, int bit_depth, int color_type,
                                                 std::vector<unsigned char>& rows, std::size_t rowbytes) {
  std::vector<unsigned char> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_silent_error, png_silent_warning);
  if (!png) throw Error("png encoder allocation failed");
  png_infop info = png_create_info_struct(png);
  PngMemWriter writer{&out};
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(height));
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png encoding failed");
  }
  png_set_write_fn(png, &writer, png_mem_write, png_mem_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) row_ptrs[y] = rows.data() + rowbytes * y;
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace detail

inline Image decode_image(std::span<const unsigned char> bytes) {
  detail::PngRaw raw;
  if (!detail::decode_png_raw(bytes, raw)) throw Error("malformed PNG");
  const bool gray = raw.color_type == PNG_COLOR_TYPE_GRAY || raw.color_type == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (gray) throw Error("unsupported color type: expected RGB or RGBA");
  const int step = raw.bit_depth == 16 ? 2 : 1;
  std::vector<Rgb> px(static_cast<std::size_t>(raw.width) * raw.height);
  for (int y = 0; y < raw.height; ++y) {
    const unsigned char* row = raw.rows.data() + raw.rowbytes * y;
    for (int x = 0; x < raw.width; ++x) {
      const unsigned char* p = row + static_cast<std::size_t>(x) * raw.channels * step;
      // 16-bit samples keep their most significant byte
      px[static_cast<std::size_t>(y) * raw.width + x] = Rgb{p[0], p[step], p[2 * step]};
    }
  }
  return Image(raw.width, raw.height, std::move(px));
}

inline Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("missing file: " + path.string());
  return decode_image(read_file_bytes(path));
}

inline std::vector<unsigned char> encode_image(const Image& img) {
  const std::size_t rowbytes = static_cast<std::size_t>(img.width()) * 3;
  std::vector<unsigned char> rows(rowbytes * img.height());
  for (std::size_t k = 0; k < img.size(); ++k) {
    rows[3 * k] = img[k].r;
    rows[3 * k + 1] = img[k].g;
    rows[3 * k + 2] = img[k].b;
  }
  return detail::encode_png_raw(img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, rows, rowbytes);
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
  write_file_bytes(path, encode_image(img));
}

inline LabelMap decode_label_map(std::span<const unsigned char> bytes) {
  detail::PngRaw raw;
  if (!detail::decode_png_raw(bytes, raw)) throw Error("malformed PNG");
  if (raw.color_type != PNG_COLOR_TYPE_GRAY) throw Error("expected single-channel label map");
  if (raw.bit_depth != 16) throw Error("expected 16-bit label map");
  LabelMap map(raw.width, raw.height);
  for (int y = 0; y < raw.height; ++y) {
    const unsigned char* row = raw.rows.data() + raw.rowbytes * y;
    for (int x = 0; x < raw.width; ++x)
      map.at(x, y) = static_cast<LabelId>((row[2 * x] << 8) | row[2 * x + 1]);
  }
  return map;
}

inline LabelMap load_label_map(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("missing file: " + path.string());
  return decode_label_map(read_file_bytes(path));
}

inline std::vector<unsigned char> encode_label_map(const LabelMap& map) {
  const std::size_t rowbytes = static_cast<std::size_t>(map.width()) * 2;
  std::vector<unsigned char> rows(rowbytes * map.height());
  for (std::size_t k = 0; k < map.size(); ++k) {
    rows[2 * k] = static_cast<unsigned char>(map[k] >> 8);
    rows[2 * k + 1] = static_cast<unsigned char>(map[k] & 0xff);
  }
  return detail::encode_png_raw(map.width(), map.height(), 16, PNG_COLOR_TYPE_GRAY, rows, rowbytes);
}

inline void save_label_map(const LabelMap& map, const std::filesystem::path& path) {
  write_file_bytes(path, encode_label_map(map));
}

// Ground truth lives in `<stem>.png` (16-bit segment ids) next to a
// `<stem>.json` sidecar: {"classes": {"<seg>": "<name>"}, "label_binding": {"<label>": seg}}.
inline GroundTruth load_ground_truth(const std::filesystem::path& png_path) {
  GroundTruth gt;
  gt.segments = load_label_map(png_path);
  auto sidecar = png_path;
  sidecar.replace_extension(".json");
  if (!std::filesystem::exists(sidecar)) throw Error("missing ground-truth sidecar: " + sidecar.string());
  nlohmann::json doc;
  try {
    std::ifstream in(sidecar);
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed ground-truth sidecar: ") + e.what());
  }
  for (const auto& [seg, name] : doc.at("classes").items())
    gt.classes[static_cast<LabelId>(std::stoul(seg))] = name.get<std::string>();
  if (doc.contains("label_binding")) {
    std::map<LabelId, LabelId> binding;
    for (const auto& [label, seg] : doc["label_binding"].items())
      binding[static_cast<LabelId>(std::stoul(label))] = seg.get<LabelId>();
    gt.label_binding = std::move(binding);
  }
  gt.validate();
  return gt;
}

inline void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& png_path) {
  save_label_map(gt.segments, png_path);
  nlohmann::ordered_json doc;
  doc["classes"] = nlohmann::ordered_json::object();
  for (const auto& [seg, name] : gt.classes) doc["classes"][std::to_string(seg)] = name;
  if (gt.label_binding) {
    doc["label_binding"] = nlohmann::ordered_json::object();
    for (const auto& [label, seg] : *gt.label_binding) doc["label_binding"][std::to_string(label)] = seg;
  }
  auto sidecar = png_path;
  sidecar.replace_extension(".json");
  const std::string text = doc.dump(2) + "\n";
  write_file_bytes(sidecar, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

}  // namespace magicpaint
