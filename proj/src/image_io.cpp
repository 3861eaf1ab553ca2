// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>

#include "dfmnet/error.hpp"
#include "dfmnet/ops.hpp"

namespace dfmnet {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

thread_local char png_message[256];

void png_error_handler(png_structp png, png_const_charp msg) {
  std::snprintf(png_message, sizeof(png_message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

bool has_png_signature(const std::string& head) {
  return head.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(head.data()), 0, 8) == 0;
}

Image decode_png(std::FILE* fp, const std::string& name) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  if (png == nullptr) throw DecodeError("cannot initialize PNG decoder");
  png_infop info = png_create_info_struct(png);
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError(name + ": " + png_message);
  }
  png_init_io(png, fp);
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA, nullptr);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError(name + ": unsupported channel count " + std::to_string(channels));
  }
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.max_value = depth == 16 ? 65535 : 255;
  img.samples.resize(static_cast<std::size_t>(width) * height * channels);
  std::size_t k = 0;
  for (png_uint_32 y = 0; y < height; ++y) {
    const png_bytep row = rows[y];
    for (png_uint_32 x = 0; x < width * static_cast<png_uint_32>(channels); ++x) {
      img.samples[k++] = depth == 16 ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]) : row[x];
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// Binary netpbm: "P5"/"P6", whitespace/comment separated width, height,
// maxval, one whitespace byte, then big-endian samples.
Image decode_netpbm(const std::string& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto next_number = [&]() -> std::uint64_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw DecodeError(name + ": malformed header");
    }
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::uint64_t>(bytes[pos++] - '0');
      if (v > (1u << 30)) throw DecodeError(name + ": header value out of range");
    }
    return v;
  };
  Image img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  img.width = static_cast<std::int64_t>(next_number());
  img.height = static_cast<std::int64_t>(next_number());
  const std::uint64_t maxval = next_number();
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw DecodeError(name + ": invalid extents or maximum value");
  }
  img.max_value = static_cast<std::uint32_t>(maxval);
  ++pos;  // single whitespace byte before the raster
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(img.width * img.height) * static_cast<std::size_t>(img.channels);
  if (pos > bytes.size() || bytes.size() - pos < count * bytes_per) throw DecodeError(name + ": truncated raster");
  img.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * bytes_per);
    img.samples[i] = bytes_per == 2 ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : p[0];
    if (img.samples[i] > maxval) throw DecodeError(name + ": sample exceeds maximum value");
  }
  return img;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

fs::path find_partner(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".png", ".pgm", ".ppm", ".PNG"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return {};
}

}  // namespace

Image read_image(const fs::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw MissingFile("cannot open " + path.string());
  std::string head(8, '\0');
  head.resize(std::fread(head.data(), 1, head.size(), fp.get()));
  if (has_png_signature(head)) {
    std::rewind(fp.get());
    return decode_png(fp.get(), path.string());
  }
  if (head.size() >= 2 && head[0] == 'P' && (head[1] == '5' || head[1] == '6')) {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_netpbm(bytes, path.string());
  }
  throw DecodeError(path.string() + ": not a PNG, PGM or PPM image");
}

void write_png(const fs::path& path, const Tensor& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidConfig("PNG bit depth must be 8 or 16");
  std::int64_t c = 1, h = 0, w = 0;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() >= 3 && image.numel() == image.dim(image.rank() - 3) * image.dim(image.rank() - 2) *
                                                        image.dim(image.rank() - 1)) {
    c = image.dim(image.rank() - 3);
    h = image.dim(image.rank() - 2);
    w = image.dim(image.rank() - 1);
  }
  if ((c != 1 && c != 3) || h == 0 || w == 0) throw ShapeMismatch("cannot write " + to_string(image.shape()) + " as PNG");

  const int bytes_per = bit_depth / 8;
  const double levels = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<png_byte> raster(static_cast<std::size_t>(h * w * c * bytes_per));
  auto src = image.data();
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t k = 0; k < c; ++k) {
        const double v = std::clamp(static_cast<double>(src[(k * h + y) * w + x]), 0.0, 1.0);
        const auto q = static_cast<std::uint32_t>(std::lround(v * levels));
        const std::size_t at = static_cast<std::size_t>(((y * w + x) * c + k) * bytes_per);
        if (bytes_per == 2) {
          raster[at] = static_cast<png_byte>(q >> 8);
          raster[at + 1] = static_cast<png_byte>(q & 0xff);
        } else {
          raster[at] = static_cast<png_byte>(q);
        }
      }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (std::int64_t y = 0; y < h; ++y) rows[y] = raster.data() + y * w * c * bytes_per;

  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw MissingFile("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  if (png == nullptr) throw DecodeError("cannot initialize PNG encoder");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DecodeError(path.string() + ": " + png_message);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor image_to_tensor(const Image& image, int channels) {
  if (channels != 1 && channels != 3) throw InvalidConfig("tensor images have 1 or 3 channels");
  const std::int64_t plane = image.width * image.height;
  const double scale = 1.0 / static_cast<double>(image.max_value);
  Tensor out = Tensor::zeros({channels, image.height, image.width});
  auto dst = out.mutable_data();
  for (std::int64_t p = 0; p < plane; ++p) {
    if (image.channels == channels) {
      for (int k = 0; k < channels; ++k) {
        dst[k * plane + p] = static_cast<float>(image.samples[p * channels + k] * scale);
      }
    } else if (image.channels == 1) {
      const auto v = static_cast<float>(image.samples[p] * scale);
      for (int k = 0; k < channels; ++k) dst[k * plane + p] = v;
    } else {
      const std::uint16_t* s = &image.samples[p * 3];
      dst[p] = static_cast<float>((0.299 * s[0] + 0.587 * s[1] + 0.114 * s[2]) * scale);
    }
  }
  return out;
}

AuxKind classify_aux(const Image& image) {
  if (image.channels == 3) return AuxKind::kFlowRgb;
  return image.max_value > 255 ? AuxKind::kDepth16 : AuxKind::kDepth8;
}

std::vector<std::pair<std::string, fs::path>> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingFile("no directory " + dir.string());
  std::map<std::string, fs::path> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) found.emplace(e.path().stem().string(), e.path());
  }
  return {found.begin(), found.end()};
}

DatasetManifest scan_dataset(const fs::path& root, InputMode mode, bool need_gt) {
  DatasetManifest m;
  m.root = root;
  const fs::path aux_dir = root / (mode == InputMode::kRgbd ? "depth" : "flow");
  const fs::path gt_dir = root / "GT";
  if (!fs::is_directory(aux_dir)) throw MissingFile("no directory " + aux_dir.string());
  const bool have_gt = fs::is_directory(gt_dir);
  if (need_gt && !have_gt) throw MissingFile("no directory " + gt_dir.string());
  for (const auto& [stem, rgb] : list_images(root / "RGB")) {
    ManifestEntry e{stem, rgb, find_partner(aux_dir, stem), {}};
    if (e.aux.empty()) throw MissingFile("no auxiliary image for '" + stem + "' in " + aux_dir.string());
    if (have_gt) {
      e.gt = find_partner(gt_dir, stem);
      if (e.gt.empty() && need_gt) throw MissingFile("no mask for '" + stem + "' in " + gt_dir.string());
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw EmptyDataset("no images in " + (root / "RGB").string());
  return m;
}

Tensor resize_image(const Tensor& image, std::int64_t h, std::int64_t w) {
  if (image.dim(1) == h && image.dim(2) == w) return image;
  Tensor batched = image.reshape({1, image.dim(0), image.dim(1), image.dim(2)});
  return resize_bilinear(batched, h, w).reshape({image.dim(0), h, w});
}

Sample load_sample(const ManifestEntry& entry, InputMode mode, std::int64_t size) {
  Sample s;
  s.id = entry.id;
  s.rgb = resize_image(image_to_tensor(read_image(entry.rgb), 3), size, size);
  const int aux_channels = mode == InputMode::kRgbd ? 1 : 3;
  if (entry.aux.empty()) {
    s.aux = Tensor::zeros({aux_channels, size, size});
  } else {
    s.aux = resize_image(image_to_tensor(read_image(entry.aux), aux_channels), size, size);
  }
  if (entry.gt.empty()) {
    s.gt = Tensor::zeros({1, size, size});
  } else {
    s.gt = resize_image(image_to_tensor(read_image(entry.gt), 1), size, size).clone();
    for (float& v : s.gt.mutable_data()) v = v >= 0.5f ? 1.0f : 0.0f;
  }
  return s;
}

}  // namespace dfmnet
