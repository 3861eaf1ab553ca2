// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>

#include "dfmnet/backbone.hpp"
#include "dfmnet/nn.hpp"

namespace dfmnet {

/// Compressed decoder features: low = hierarchies 1-3 at hierarchy-1
/// extents, high = hierarchies 4-6 at hierarchy-4 extents. Both 16 channels.
struct GroupedFeatures {
  Tensor low;
  Tensor high;
};

/// Two-stage decoder. Pre-fusion compresses each of the six fused features
/// to 16 channels (DSConv + channel attention) and sums them in two groups;
/// full fusion concatenates the groups and predicts the saliency map.
struct Decoder {
  static constexpr int kLevels = 6;
  static constexpr std::int64_t kWidth = 16;

  std::array<DSConv, kLevels> compress;
  std::array<ChannelAttention, kLevels> attend;
  DSConv refine1;  // 32 -> 16
  DSConv refine2;  // 16 -> 16
  PredictionHead predict;

  /// Decoder layers live under `prefix`; the final prediction conv under
  /// `head_prefix`.
  static Decoder create(ParamStore& store, Rng& rng, const std::string& prefix, const std::string& head_prefix);

  /// cf^i for level i (0-based; level 5 is the pyramid-pooling output).
  Tensor compressed(int level, const Tensor& f, Phase phase) const;
  GroupedFeatures prefuse(const HierarchySet& fused, Phase phase) const;
  /// Saliency map S_c at twice the extents of `g.low`.
  Tensor fullfuse(const GroupedFeatures& g, Phase phase) const;
};

}  // namespace dfmnet
