// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfmnet/backbone.hpp"
#include "dfmnet/decoder.hpp"
#include "dfmnet/dfmw.hpp"
#include "dfmnet/dqfm.hpp"
#include "dfmnet/nn.hpp"

namespace dfmnet {

/// rgbd: the auxiliary input is a 1-channel depth map. flow3: a 3-channel
/// optical-flow image (video saliency).
enum class InputMode { kRgbd, kFlow3 };

enum class DepthBackboneKind {
  kTailored,   // the 15-block IRB depth encoder
  kMobileNet,  // the RGB branch's MobileNet-V2 table on the depth input
};

const char* to_string(InputMode m);
InputMode parse_input_mode(const std::string& s);

/// Parameter subtrees. Every stored tensor belongs to exactly one.
inline constexpr std::array<const char*, 6> kSubtrees = {"rgb", "tdb", "dqw", "dha", "decoder", "heads"};

struct ModelConfig {
  InputMode mode = InputMode::kRgbd;
  DepthBackboneKind depth_backbone = DepthBackboneKind::kTailored;
  bool use_dqw = true;
  bool use_dha = true;
  VbaVariant vba = VbaVariant::kProposed;
  int recalib_count = 2;
  Gating gating = Gating::kMultiple;

  std::int64_t aux_channels() const { return mode == InputMode::kRgbd ? 1 : 3; }
  void validate() const;
};

/// Structural configuration (mode, backbone kind, which gates exist)
/// recovered from stored tensor names and shapes. Non-structural fields keep
/// their defaults.
ModelConfig infer_config(const std::vector<NamedTensor>& weights);

struct ForwardResult {
  Tensor saliency;        // S_c, N x 1 x H x W
  Tensor depth_saliency;  // S_d, N x 1 x H x W
  AlphaVector alpha;      // undefined when DQW is disabled
  BetaMaps beta;          // undefined when DHA is disabled
  HierarchySet rgb;
  HierarchySet depth;
  HierarchySet fused;
};

class DfmNet {
 public:
  /// Randomly initialized network; identical seeds give identical weights.
  DfmNet(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  /// Gate options that do not change the parameter set.
  void set_gate_options(VbaVariant vba, int recalib_count, Gating gating);

  ParamStore& weights() { return store_; }
  const ParamStore& weights() const { return store_; }

  /// Copies stored values into the parameters by name. Throws ModeMismatch
  /// if the file was saved for another input mode and InvalidConfig if the
  /// name sets or shapes otherwise differ.
  void load(const std::vector<NamedTensor>& weights);

  /// rgb: N x 3 x H x W, aux: N x aux_channels x H x W, H and W multiples
  /// of 32. Throws ModeMismatch if aux does not fit the configured mode.
  ForwardResult forward(const Tensor& rgb, const Tensor& aux, Phase phase) const;

  const Encoder& rgb_branch() const { return rgb_; }
  const Encoder& depth_branch() const { return depth_; }
  const DepthQualityWeighting& dqw() const { return dqw_; }
  const DepthHolisticAttention& dha() const { return dha_; }
  const Decoder& decoder() const { return decoder_; }

 private:
  ModelConfig config_;
  ParamStore store_;
  Encoder rgb_;
  PyramidPooling ppm_;
  Encoder depth_;
  DepthQualityWeighting dqw_;
  DepthHolisticAttention dha_;
  Decoder decoder_;
  PredictionHead depth_head_;
};

/// BCE(S_c, G) + BCE(S_d, G), each averaged over pixels.
Tensor saliency_loss(const Tensor& saliency, const Tensor& depth_saliency, const Tensor& gt);

}  // namespace dfmnet
