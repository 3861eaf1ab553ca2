// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfmnet/nn.hpp"

namespace dfmnet {

inline constexpr int kHierarchies = 5;
/// Channel count of hierarchy i (0-based) in both encoder branches.
inline constexpr std::array<std::int64_t, kHierarchies> kHierarchyChannels = {16, 24, 32, 96, 320};
/// Output stride of hierarchy i relative to the input image.
inline constexpr std::array<int, kHierarchies> kHierarchyStride = {2, 4, 8, 16, 16};

/// Five-level feature pyramid f[0..4]; `f6` holds the pyramid-pooling output
/// for the fused branch and is undefined otherwise.
struct HierarchySet {
  std::array<Tensor, kHierarchies> f;
  Tensor f6;
};

/// Encoder input extents must be positive multiples of this.
inline constexpr std::int64_t kInputGranularity = 32;

/// Throws ShapeMismatch unless x is N x channels x H x W with H, W positive
/// multiples of kInputGranularity.
void check_encoder_input(const Tensor& x, std::int64_t channels, const char* what);

/// Layer table of the tailored depth backbone: one IRB row per hierarchy.
struct TdbSpec {
  std::vector<IrbConfig> rows;
  std::int64_t in_channels = 1;

  /// The standard 15-block table for 1-channel depth or 3-channel flow input.
  static TdbSpec standard(std::int64_t in_channels);
  int block_count() const;
  void validate() const;
};

/// A five-hierarchy encoder made of an optional stem conv followed by IRB
/// stages. The RGB branch, the tailored depth backbone and the MobileNet-V2
/// depth variant are all instances.
class Encoder {
 public:
  /// MobileNet-V2 table truncated at the 320-channel layer, last stage at
  /// stride 1. `in_channels` is 3 for RGB.
  static Encoder mobilenet(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t in_channels);
  static Encoder tailored(ParamStore& store, Rng& rng, const std::string& prefix, const TdbSpec& spec);

  std::int64_t in_channels() const { return in_channels_; }

  /// Runs hierarchy i (0-based) on its input: the image for i == 0, the
  /// previous hierarchy's (possibly fused) output otherwise.
  Tensor step(int i, const Tensor& x, Phase phase) const;

  /// All five hierarchies, feeding each output straight to the next.
  HierarchySet forward(const Tensor& x, Phase phase) const;

 private:
  std::int64_t in_channels_ = 0;
  bool has_stem_ = false;
  ConvBnAct stem_;
  std::array<std::vector<IrbStage>, kHierarchies> stages_;
};

/// 1x1 conv with bias followed by bilinear upsampling and a sigmoid.
/// The upsampling acts on the logits, so the probability map keeps sharp
/// transitions at full resolution.
struct PredictionHead {
  Tensor weight;
  Tensor bias;
  Conv2dOptions opt;
  Ratio upsample;

  static PredictionHead create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin, int k,
                               Ratio upsample);
  Tensor logits(const Tensor& x) const;
  Tensor forward(const Tensor& x) const { return sigmoid(logits(x)); }
};

/// Coarse saliency S_d from f_d^5: 1x1 conv -> x16 upsample -> sigmoid.
PredictionHead make_depth_head(ParamStore& store, Rng& rng, const std::string& prefix);

}  // namespace dfmnet
