// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace dfmnet {

Scene make_scene(Rng& rng, const SceneOptions& options) {
  const std::int64_t n = options.size;
  const double size = static_cast<double>(n);
  const bool ellipse = rng.coin();
  const double ry = rng.uniform(options.min_radius, options.max_radius) * size;
  const double rx = rng.uniform(options.min_radius, options.max_radius) * size;
  const double cy = rng.uniform(ry, size - ry);
  const double cx = rng.uniform(rx, size - rx);

  std::array<double, 3> fg{}, bg{};
  for (int c = 0; c < 3; ++c) {
    bg[c] = rng.uniform(0.1, 0.5);
    fg[c] = rng.uniform(bg[c], 0.9);
  }
  // The object is brighter than the background in every channel and by at
  // least 0.35 in red or green, so its outline survives a luminance
  // conversion (an isoluminant object would have no gray edges).
  const int pivot = static_cast<int>(rng.below(2));
  fg[pivot] = bg[pivot] + 0.35 + 0.1 * rng.uniform();
  const double near = rng.uniform(0.75, 0.95);
  const double ramp_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ramp_base = rng.uniform(0.1, 0.3);

  Scene s{Tensor::zeros({3, n, n}), Tensor::zeros({1, n, n}), Tensor::zeros({1, n, n})};
  auto rgb = s.rgb.mutable_data();
  auto depth = s.depth.mutable_data();
  auto gt = s.gt.mutable_data();
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const double y = (static_cast<double>(i) + 0.5 - cy) / ry;
      const double x = (static_cast<double>(j) + 0.5 - cx) / rx;
      const bool inside = ellipse ? (x * x + y * y <= 1.0) : (std::abs(x) <= 1.0 && std::abs(y) <= 1.0);
      const std::int64_t p = i * n + j;
      gt[p] = inside ? 1.0f : 0.0f;
      const double u = (std::cos(ramp_angle) * static_cast<double>(j) + std::sin(ramp_angle) * static_cast<double>(i)) /
                       size;
      depth[p] = static_cast<float>(inside ? near : ramp_base + 0.15 * (u + 1.0) / 2.0);
      for (int c = 0; c < 3; ++c) {
        const double base = inside ? fg[c] : bg[c];
        const double v = base + options.texture * (2.0 * rng.uniform() - 1.0);
        rgb[c * n * n + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return s;
}

std::vector<Sample> synthetic_dataset(int count, std::uint64_t seed, InputMode mode, const SceneOptions& options) {
  Rng rng(seed);
  std::vector<Sample> out;
  for (int k = 0; k < count; ++k) {
    Scene sc = make_scene(rng, options);
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%03d", k);
    Tensor aux = sc.depth;
    if (mode == InputMode::kFlow3) aux = concat_channels({sc.depth.reshape({1, 1, options.size, options.size}),
                                                          sc.depth.reshape({1, 1, options.size, options.size}),
                                                          sc.depth.reshape({1, 1, options.size, options.size})})
                                          .reshape({3, options.size, options.size});
    out.push_back(Sample{id, sc.rgb, aux, sc.gt});
  }
  return out;
}

}  // namespace dfmnet
