// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dfmnet/model.hpp"
#include "dfmnet/random.hpp"
#include "dfmnet/train.hpp"

namespace dfmnet {

/// A generated RGB-D scene: one foreground shape (ellipse or rectangle) over
/// a textured background. The depth map shares the geometry: a smooth
/// background ramp with the object as a nearer (brighter) plateau.
/// rgb 3 x S x S, depth 1 x S x S, gt 1 x S x S binary.
struct Scene {
  Tensor rgb;
  Tensor depth;
  Tensor gt;
};

struct SceneOptions {
  std::int64_t size = 256;
  double texture = 0.05;  // amplitude of per-pixel RGB noise
  double min_radius = 0.15;  // object half-extent range, fraction of size
  double max_radius = 0.3;
};

Scene make_scene(Rng& rng, const SceneOptions& options = {});

/// `count` scenes as training samples with ids "scene_000", ... In flow3
/// mode the depth map is replicated into three channels.
std::vector<Sample> synthetic_dataset(int count, std::uint64_t seed, InputMode mode = InputMode::kRgbd,
                                      const SceneOptions& options = {});

}  // namespace dfmnet
