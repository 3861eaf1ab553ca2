// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "dfmnet/backbone.hpp"
#include "dfmnet/nn.hpp"

namespace dfmnet {

/// How the per-channel boundary-alignment vector is computed from the two
/// transferred low-level feature maps a (RGB) and b (depth).
enum class VbaVariant {
  kProposed,  // GAP(a*b) / (GAP(a+b) + eps)
  kDice,      // 2 GAP(a*b) / (GAP(a^2 + b^2) + eps)
  kAdd,       // GAP(a+b)
  kMul,       // GAP(a*b)
};

enum class Gating {
  kMultiple,   // alpha_i, beta_i per hierarchy
  kIdentical,  // alpha_1 at every hierarchy
};

const char* to_string(VbaVariant v);
VbaVariant parse_vba_variant(const std::string& s);
const char* to_string(Gating g);
Gating parse_gating(const std::string& s);

inline constexpr float kAlignmentEps = 1e-8f;

/// Alignment vector of two N x C x H x W maps, shape N x C x 1 x 1.
Tensor alignment_vector(const Tensor& a, const Tensor& b, VbaVariant variant);

/// Per-hierarchy depth weights, alpha: N x 5 x 1 x 1, each entry in (0,1).
struct AlphaVector {
  Tensor alpha;

  /// alpha_i (0-based) as an N x 1 x 1 x 1 tensor broadcastable over features.
  Tensor at(int i) const { return slice_channels(alpha, i, i + 1); }
  float value(std::int64_t sample, int i) const { return alpha.at({sample, i, 0, 0}); }
  /// Mean of the five weights of one sample.
  float mean(std::int64_t sample) const;
};

/// Spatial depth attention: `full` at the extents of hierarchy 1 and one map
/// per hierarchy resampled to that hierarchy's extents, all N x 1 x h x w.
struct BetaMaps {
  Tensor full;
  std::array<Tensor, kHierarchies> maps;
};

/// Resampling factor taking the hierarchy-1 map to hierarchy i (0-based).
Ratio beta_factor(int i);

/// Depth quality-inspired weighting: low-level alignment at three scales ->
/// 48-vector -> two-layer perceptron -> five sigmoid weights.
struct DepthQualityWeighting {
  static constexpr int kScales = 3;
  static constexpr std::int64_t kWidth = 16;
  static constexpr std::int64_t kHidden = 24;

  ConvBnAct transfer_rgb;
  ConvBnAct transfer_depth;
  Linear fc1;
  Linear fc2;

  static DepthQualityWeighting create(ParamStore& store, Rng& rng, const std::string& prefix);

  /// Multi-scale alignment vector, N x 48 x 1 x 1 (full, x1/2, x1/4 scales).
  Tensor multiscale_alignment(const Tensor& f_r1, const Tensor& f_d1, VbaVariant variant, Phase phase) const;
  AlphaVector forward(const Tensor& f_r1, const Tensor& f_d1, VbaVariant variant, Phase phase) const;
};

/// Depth holistic attention: the deepest depth feature, upsampled to
/// hierarchy-1 extents and repeatedly recalibrated against the low-level
/// cross-modal feature, yields a one-channel attention map.
struct DepthHolisticAttention {
  static constexpr std::int64_t kWidth = 16;
  static constexpr int kMaxRecalibration = 3;

  ConvBnAct transfer_rgb;
  ConvBnAct transfer_depth;
  ConvBnAct transfer_deep;
  ConvBnAct recalibrate;  // dilated 3x3, shared by every recalibration round
  ConvBnAct attention;    // 3x3 to one channel, sigmoid

  static DepthHolisticAttention create(ParamStore& store, Rng& rng, const std::string& prefix);

  /// Cross-modal low-level feature f_ec = transfer(f_r1) * transfer(f_d1).
  Tensor cross_modal(const Tensor& f_r1, const Tensor& f_d1, Phase phase) const;
  /// One recalibration round: up2(dconv(down2(x + f_ec))).
  Tensor recalibration(const Tensor& x, const Tensor& f_ec, Phase phase) const;
  BetaMaps forward(const Tensor& f_r1, const Tensor& f_d1, const Tensor& f_d5, int recalib_count, Phase phase) const;
};

/// f_c = f_r + alpha * beta * f_d. An undefined alpha or beta stands for a
/// gate fixed at one; with both undefined the result is f_r + f_d.
Tensor fuse(const Tensor& f_r, const Tensor& f_d, const Tensor& alpha, const Tensor& beta);

}  // namespace dfmnet
