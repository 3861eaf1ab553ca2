// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dfmnet/ops.hpp"
#include "dfmnet/random.hpp"
#include "dfmnet/tensor.hpp"

namespace dfmnet {

/// Ordered registry of named parameter and buffer tensors. Names are dotted
/// paths ("tdb.h2.irb0.expand.conv.w"); the first component is the subtree.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable;
  };

  /// Registers a tensor; throws DuplicateName if the name is taken.
  Tensor add(const std::string& name, Tensor tensor, bool trainable);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Trainable tensors, in registration order.
  std::vector<Tensor> trainable() const;
  /// Trainable tensors under `prefix` (prefix match on the dotted name).
  std::vector<Tensor> trainable(const std::string& prefix) const;

  /// Number of stored floats (parameters and buffers) under `prefix`.
  std::int64_t count(const std::string& prefix = "") const;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Phase { kInference, kTraining };
enum class Activation { kNone, kRelu, kSigmoid };

Tensor activate(const Tensor& x, Activation act);

/// He-normal initialized conv weight (std = sqrt(2 / fan_in)).
Tensor init_conv_weight(Rng& rng, std::int64_t cout, std::int64_t cin_per_group, std::int64_t k);

struct BatchNorm2d {
  Tensor gamma, beta, running_mean, running_var;

  static BatchNorm2d create(ParamStore& store, const std::string& prefix, std::int64_t channels);
  Tensor forward(const Tensor& x, Phase phase) const;
};

/// conv (no bias) -> BatchNorm -> activation. BConv, DConv and the
/// depthwise/pointwise halves of DSConv are all instances.
struct ConvBnAct {
  Tensor weight;
  BatchNorm2d bn;
  Conv2dOptions opt;
  Activation act = Activation::kRelu;

  static ConvBnAct create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin,
                          std::int64_t cout, int k, Conv2dOptions opt, Activation act);
  Tensor forward(const Tensor& x, Phase phase) const;
};

/// BConv_kxk: stride 1, "same" padding.
ConvBnAct make_bconv(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin, std::int64_t cout,
                     int k, Activation act = Activation::kRelu);

/// 3x3 dilated conv, stride 1, dilation 2, padding 2, BN + ReLU.
ConvBnAct make_dconv(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin, std::int64_t cout);

/// Depthwise-separable 3x3: depthwise conv + BN + ReLU, then pointwise 1x1 + BN + ReLU.
struct DSConv {
  ConvBnAct depthwise;
  ConvBnAct pointwise;

  static DSConv create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin,
                       std::int64_t cout);
  Tensor forward(const Tensor& x, Phase phase) const;
  /// Conv weights only: 9*cin + cin*cout.
  static std::int64_t conv_weight_count(std::int64_t cin, std::int64_t cout) { return 9 * cin + cin * cout; }
};

/// Row of an inverted-residual stack: expansion t, output channels c,
/// repeats n, stride s of the first repeat.
struct IrbConfig {
  int t = 1;
  std::int64_t c = 1;
  int n = 1;
  int s = 1;

  void validate() const;
};

/// Inverted residual bottleneck: 1x1 expand (skipped when t == 1) ->
/// depthwise 3x3 -> linear 1x1 projection, plus identity skip when the
/// block keeps stride 1 and channel count.
struct InvertedResidual {
  bool has_expand = false;
  ConvBnAct expand;
  ConvBnAct depthwise;
  ConvBnAct project;
  bool residual = false;

  static InvertedResidual create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin,
                                 std::int64_t cout, int t, int stride);
  Tensor forward(const Tensor& x, Phase phase) const;
};

/// One IrbConfig expanded into its n blocks.
struct IrbStage {
  std::vector<InvertedResidual> blocks;

  static IrbStage create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin,
                         const IrbConfig& cfg);
  Tensor forward(const Tensor& x, Phase phase) const;
};

/// Fully connected layer applied to N x C x 1 x 1 tensors.
struct Linear {
  Tensor weight;  // [out, in, 1, 1]
  Tensor bias;    // [out]

  static Linear create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t in, std::int64_t out);
  Tensor forward(const Tensor& x) const;
};

/// Squeeze-excitation channel attention:
///   y = x * sigmoid(fc2(relu(fc1(GAP(x))))).
struct ChannelAttention {
  static constexpr int kReduction = 4;
  Linear fc1;
  Linear fc2;

  static ChannelAttention create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t channels);
  /// The per-channel scale s in (0,1), shape N x C x 1 x 1.
  Tensor scale(const Tensor& x) const;
  Tensor forward(const Tensor& x) const;
};

/// Pyramid pooling: adaptive-average pools at bins {1,2,3,6}, each reduced
/// by 1x1 BConv to `inner` channels and upsampled back, concatenated with
/// the input, and fused by 1x1 BConv to `out` channels.
struct PyramidPooling {
  static constexpr int kBins[4] = {1, 2, 3, 6};
  std::vector<ConvBnAct> branches;
  ConvBnAct fuse;

  static PyramidPooling create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin,
                               std::int64_t inner, std::int64_t cout);
  /// Upsampled branch outputs, in bin order.
  std::vector<Tensor> branch_outputs(const Tensor& x, Phase phase) const;
  Tensor forward(const Tensor& x, Phase phase) const;
};

}  // namespace dfmnet
