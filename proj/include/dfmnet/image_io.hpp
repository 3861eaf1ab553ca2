// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfmnet/model.hpp"
#include "dfmnet/tensor.hpp"
#include "dfmnet/train.hpp"

namespace dfmnet {

/// Decoded raster: interleaved samples in [0, max_value].
struct Image {
  std::int64_t width = 0;
  std::int64_t height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB); alpha is dropped
  std::uint32_t max_value = 255;
  std::vector<std::uint16_t> samples;
};

/// PNG (any bit depth; palettes expanded, alpha stripped) or binary PGM/PPM
/// (P5/P6, 8- or 16-bit). Throws MissingFile if unreadable, DecodeError if
/// malformed or of another format.
Image read_image(const std::filesystem::path& path);

/// Writes C x H x W (C = 1 or 3) or H x W values in [0,1] as a PNG of the
/// given bit depth (8 or 16), rounding to the nearest level.
void write_png(const std::filesystem::path& path, const Tensor& image, int bit_depth = 8);

/// channels x H x W in [0,1]. Gray is replicated to 3 channels; RGB is
/// reduced to luminance for 1 channel.
Tensor image_to_tensor(const Image& image, int channels);

/// Kinds of auxiliary image a dataset can hold.
enum class AuxKind { kDepth8, kDepth16, kFlowRgb };
AuxKind classify_aux(const Image& image);

struct ManifestEntry {
  std::string id;
  std::filesystem::path rgb;
  std::filesystem::path aux;
  std::filesystem::path gt;  // empty when the set has no masks
};

/// Dataset layout: <root>/RGB, <root>/depth (or flow in flow3 mode), and
/// optionally <root>/GT, files matched by stem.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;  // sorted by id
};

/// Throws MissingFile for a missing directory or an RGB image without a
/// partner, EmptyDataset for no images. Masks are required when `need_gt`.
DatasetManifest scan_dataset(const std::filesystem::path& root, InputMode mode, bool need_gt = true);

/// Stems of .png/.pgm/.ppm files in `dir` mapped to their paths, sorted.
std::vector<std::pair<std::string, std::filesystem::path>> list_images(const std::filesystem::path& dir);

inline constexpr std::int64_t kInputSize = 256;

/// Loads one entry: values normalized to [0,1], bilinear-resized to
/// size x size, GT binarized at 0.5 after resizing. Absent aux or GT paths
/// give all-zero maps.
Sample load_sample(const ManifestEntry& entry, InputMode mode, std::int64_t size = kInputSize);

/// C x H x W tensor resized bilinearly to C x h x w.
Tensor resize_image(const Tensor& image, std::int64_t h, std::int64_t w);

}  // namespace dfmnet
