// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/dqfm.hpp"

#include "dfmnet/error.hpp"

namespace dfmnet {

const char* to_string(VbaVariant v) {
  switch (v) {
    case VbaVariant::kProposed: return "proposed";
    case VbaVariant::kDice: return "dice";
    case VbaVariant::kAdd: return "add";
    case VbaVariant::kMul: return "mul";
  }
  return "?";
}

VbaVariant parse_vba_variant(const std::string& s) {
  for (VbaVariant v : {VbaVariant::kProposed, VbaVariant::kDice, VbaVariant::kAdd, VbaVariant::kMul}) {
    if (s == to_string(v)) return v;
  }
  throw InvalidConfig("unknown alignment variant '" + s + "' (expected proposed, dice, add or mul)");
}

const char* to_string(Gating g) { return g == Gating::kMultiple ? "multiple" : "identical"; }

Gating parse_gating(const std::string& s) {
  if (s == "multiple") return Gating::kMultiple;
  if (s == "identical") return Gating::kIdentical;
  throw InvalidConfig("unknown gating '" + s + "' (expected multiple or identical)");
}

Tensor alignment_vector(const Tensor& a, const Tensor& b, VbaVariant variant) {
  if (a.rank() != 4 || a.shape() != b.shape()) {
    throw ShapeMismatch("alignment needs two equal NCHW maps, got " + to_string(a.shape()) + " and " +
                        to_string(b.shape()));
  }
  switch (variant) {
    case VbaVariant::kProposed:
      return div(global_avg_pool(mul(a, b)), add_scalar(global_avg_pool(add(a, b)), kAlignmentEps));
    case VbaVariant::kDice:
      return div(mul_scalar(global_avg_pool(mul(a, b)), 2.0f),
                 add_scalar(global_avg_pool(add(mul(a, a), mul(b, b))), kAlignmentEps));
    case VbaVariant::kAdd:
      return global_avg_pool(add(a, b));
    case VbaVariant::kMul:
      return global_avg_pool(mul(a, b));
  }
  throw InvalidConfig("unknown alignment variant");
}

float AlphaVector::mean(std::int64_t sample) const {
  double acc = 0.0;
  for (int i = 0; i < kHierarchies; ++i) acc += value(sample, i);
  return static_cast<float>(acc / kHierarchies);
}

Ratio beta_factor(int i) {
  static constexpr std::array<int, kHierarchies> kDen = {1, 2, 4, 8, 8};
  return Ratio{1, kDen.at(static_cast<std::size_t>(i))};
}

DepthQualityWeighting DepthQualityWeighting::create(ParamStore& store, Rng& rng, const std::string& prefix) {
  DepthQualityWeighting dqw;
  dqw.transfer_rgb = make_bconv(store, rng, prefix + ".transfer_rgb", kHierarchyChannels[0], kWidth, 1);
  dqw.transfer_depth = make_bconv(store, rng, prefix + ".transfer_depth", kHierarchyChannels[0], kWidth, 1);
  dqw.fc1 = Linear::create(store, rng, prefix + ".fc1", kWidth * kScales, kHidden);
  dqw.fc2 = Linear::create(store, rng, prefix + ".fc2", kHidden, kHierarchies);
  return dqw;
}

Tensor DepthQualityWeighting::multiscale_alignment(const Tensor& f_r1, const Tensor& f_d1, VbaVariant variant,
                                                   Phase phase) const {
  Tensor a = transfer_rgb.forward(f_r1, phase);
  Tensor b = transfer_depth.forward(f_d1, phase);
  std::vector<Tensor> scales;
  for (int s = 0; s < kScales; ++s) {
    if (s > 0) {
      a = max_pool2x2(a);
      b = max_pool2x2(b);
    }
    scales.push_back(alignment_vector(a, b, variant));
  }
  return concat_channels(scales);
}

AlphaVector DepthQualityWeighting::forward(const Tensor& f_r1, const Tensor& f_d1, VbaVariant variant,
                                           Phase phase) const {
  Tensor v = multiscale_alignment(f_r1, f_d1, variant, phase);
  return AlphaVector{sigmoid(fc2.forward(relu(fc1.forward(v))))};
}

DepthHolisticAttention DepthHolisticAttention::create(ParamStore& store, Rng& rng, const std::string& prefix) {
  DepthHolisticAttention dha;
  dha.transfer_rgb = make_bconv(store, rng, prefix + ".transfer_rgb", kHierarchyChannels[0], kWidth, 1);
  dha.transfer_depth = make_bconv(store, rng, prefix + ".transfer_depth", kHierarchyChannels[0], kWidth, 1);
  dha.transfer_deep = make_bconv(store, rng, prefix + ".transfer_deep", kHierarchyChannels[4], kWidth, 1);
  dha.recalibrate = make_dconv(store, rng, prefix + ".recalibrate", kWidth, kWidth);
  dha.attention = make_bconv(store, rng, prefix + ".attention", kWidth, 1, 3, Activation::kSigmoid);
  return dha;
}

Tensor DepthHolisticAttention::cross_modal(const Tensor& f_r1, const Tensor& f_d1, Phase phase) const {
  return mul(transfer_rgb.forward(f_r1, phase), transfer_depth.forward(f_d1, phase));
}

Tensor DepthHolisticAttention::recalibration(const Tensor& x, const Tensor& f_ec, Phase phase) const {
  return resample(recalibrate.forward(resample(add(x, f_ec), Ratio{1, 2}), phase), Ratio{2, 1});
}

BetaMaps DepthHolisticAttention::forward(const Tensor& f_r1, const Tensor& f_d1, const Tensor& f_d5,
                                         int recalib_count, Phase phase) const {
  if (recalib_count < 0 || recalib_count > kMaxRecalibration) {
    throw InvalidConfig("recalibration count must be in 0..3, got " + std::to_string(recalib_count));
  }
  if (f_d5.rank() != 4 || f_r1.rank() != 4 || f_d5.dim(2) * 8 != f_r1.dim(2) || f_d5.dim(3) * 8 != f_r1.dim(3)) {
    throw ShapeMismatch("deepest depth feature must be 1/8 the extents of the first hierarchy, got " +
                        to_string(f_d5.shape()) + " vs " + to_string(f_r1.shape()));
  }
  const Tensor f_ec = cross_modal(f_r1, f_d1, phase);
  Tensor f_dht = resample(transfer_deep.forward(f_d5, phase), Ratio{8, 1});
  for (int r = 0; r < recalib_count; ++r) f_dht = recalibration(f_dht, f_ec, phase);
  BetaMaps beta;
  beta.full = attention.forward(add(f_ec, f_dht), phase);
  for (int i = 0; i < kHierarchies; ++i) beta.maps[i] = resample(beta.full, beta_factor(i));
  return beta;
}

Tensor fuse(const Tensor& f_r, const Tensor& f_d, const Tensor& alpha, const Tensor& beta) {
  if (f_r.shape() != f_d.shape()) {
    throw ShapeMismatch("fusion needs equal feature shapes, got " + to_string(f_r.shape()) + " and " +
                        to_string(f_d.shape()));
  }
  if (beta.defined() && (beta.rank() != 4 || beta.dim(2) != f_d.dim(2) || beta.dim(3) != f_d.dim(3))) {
    throw ShapeMismatch("attention map extents " + to_string(beta.shape()) + " do not match features " +
                        to_string(f_d.shape()));
  }
  Tensor gated = f_d;
  if (beta.defined()) gated = mul(beta, gated);
  if (alpha.defined()) gated = mul(alpha, gated);
  return add(f_r, gated);
}

}  // namespace dfmnet
