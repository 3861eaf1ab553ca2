// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/backbone.hpp"

#include "dfmnet/error.hpp"

namespace dfmnet {

void check_encoder_input(const Tensor& x, std::int64_t channels, const char* what) {
  if (!x.defined() || x.rank() != 4 || x.dim(1) != channels || x.dim(2) % kInputGranularity != 0 ||
      x.dim(3) % kInputGranularity != 0 || x.dim(2) == 0 || x.dim(3) == 0) {
    throw ShapeMismatch(std::string(what) + " expects N x " + std::to_string(channels) + " x H x W with H, W multiples of " +
                        std::to_string(kInputGranularity) + ", got " + (x.defined() ? to_string(x.shape()) : "none"));
  }
}

TdbSpec TdbSpec::standard(std::int64_t in_channels) {
  TdbSpec spec;
  spec.in_channels = in_channels;
  spec.rows = {{3, 16, 1, 2}, {3, 24, 3, 2}, {3, 32, 7, 2}, {2, 96, 3, 2}, {2, 320, 1, 1}};
  return spec;
}

int TdbSpec::block_count() const {
  int n = 0;
  for (const auto& r : rows) n += r.n;
  return n;
}

void TdbSpec::validate() const {
  if (in_channels != 1 && in_channels != 3) throw InvalidConfig("depth backbone input must have 1 or 3 channels");
  if (rows.size() != kHierarchies) throw InvalidConfig("depth backbone needs one row per hierarchy");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].validate();
    if (rows[i].c != kHierarchyChannels[i]) throw InvalidConfig("depth backbone channels must match the RGB branch");
  }
}

Encoder Encoder::mobilenet(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t in_channels) {
  // Rows of the MobileNet-V2 table grouped by hierarchy. The 160- and
  // 320-channel rows form hierarchy 5 and run at stride 1.
  static const std::array<std::vector<IrbConfig>, kHierarchies> kTable = {{
      {{1, 16, 1, 1}},
      {{6, 24, 2, 2}},
      {{6, 32, 3, 2}},
      {{6, 64, 4, 2}, {6, 96, 3, 1}},
      {{6, 160, 3, 1}, {6, 320, 1, 1}},
  }};
  Encoder enc;
  enc.in_channels_ = in_channels;
  enc.has_stem_ = true;
  enc.stem_ = ConvBnAct::create(store, rng, prefix + ".h1.stem", in_channels, 32, 3, Conv2dOptions{2, 1, 1, 1},
                                Activation::kRelu);
  std::int64_t cin = 32;
  for (int h = 0; h < kHierarchies; ++h) {
    for (std::size_t r = 0; r < kTable[h].size(); ++r) {
      const std::string name = prefix + ".h" + std::to_string(h + 1) + ".s" + std::to_string(r);
      enc.stages_[h].push_back(IrbStage::create(store, rng, name, cin, kTable[h][r]));
      cin = kTable[h][r].c;
    }
  }
  return enc;
}

Encoder Encoder::tailored(ParamStore& store, Rng& rng, const std::string& prefix, const TdbSpec& spec) {
  spec.validate();
  Encoder enc;
  enc.in_channels_ = spec.in_channels;
  std::int64_t cin = spec.in_channels;
  for (int h = 0; h < kHierarchies; ++h) {
    enc.stages_[h].push_back(IrbStage::create(store, rng, prefix + ".h" + std::to_string(h + 1), cin, spec.rows[h]));
    cin = spec.rows[h].c;
  }
  return enc;
}

Tensor Encoder::step(int i, const Tensor& x, Phase phase) const {
  if (i < 0 || i >= kHierarchies) throw InvalidConfig("hierarchy index out of range");
  const std::int64_t expected = i == 0 ? in_channels_ : kHierarchyChannels[i - 1];
  if (x.rank() != 4 || x.dim(1) != expected) {
    throw ShapeMismatch("hierarchy " + std::to_string(i + 1) + " expects " + std::to_string(expected) +
                        " input channels, got " + to_string(x.shape()));
  }
  Tensor h = (i == 0 && has_stem_) ? stem_.forward(x, phase) : x;
  for (const auto& stage : stages_[i]) h = stage.forward(h, phase);
  return h;
}

HierarchySet Encoder::forward(const Tensor& x, Phase phase) const {
  check_encoder_input(x, in_channels_, "encoder");
  HierarchySet out;
  Tensor h = x;
  for (int i = 0; i < kHierarchies; ++i) {
    h = step(i, h, phase);
    out.f[i] = h;
  }
  return out;
}

PredictionHead PredictionHead::create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin, int k,
                                      Ratio upsample) {
  PredictionHead head;
  head.opt = Conv2dOptions{1, 1, (k - 1) / 2, 1};
  head.upsample = upsample;
  head.weight = store.add(prefix + ".conv.w", init_conv_weight(rng, 1, cin, k), true);
  head.bias = store.add(prefix + ".conv.b", Tensor::zeros({1}), true);
  return head;
}

Tensor PredictionHead::logits(const Tensor& x) const {
  return resample(conv2d(x, weight, bias, opt), upsample);
}

PredictionHead make_depth_head(ParamStore& store, Rng& rng, const std::string& prefix) {
  return PredictionHead::create(store, rng, prefix, kHierarchyChannels[4], 1, Ratio{16, 1});
}

}  // namespace dfmnet
