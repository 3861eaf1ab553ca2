// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/decoder.hpp"

#include "dfmnet/error.hpp"

namespace dfmnet {

namespace {

std::int64_t level_channels(int level) {
  return level < kHierarchies ? kHierarchyChannels[level] : kHierarchyChannels[kHierarchies - 1];
}

}  // namespace

Decoder Decoder::create(ParamStore& store, Rng& rng, const std::string& prefix, const std::string& head_prefix) {
  Decoder d;
  for (int i = 0; i < kLevels; ++i) {
    const std::string name = prefix + ".level" + std::to_string(i + 1);
    d.compress[i] = DSConv::create(store, rng, name + ".compress", level_channels(i), kWidth);
    d.attend[i] = ChannelAttention::create(store, rng, name + ".attend", kWidth);
  }
  d.refine1 = DSConv::create(store, rng, prefix + ".refine1", 2 * kWidth, kWidth);
  d.refine2 = DSConv::create(store, rng, prefix + ".refine2", kWidth, kWidth);
  d.predict = PredictionHead::create(store, rng, head_prefix, kWidth, 3, Ratio{2, 1});
  return d;
}

Tensor Decoder::compressed(int level, const Tensor& f, Phase phase) const {
  return attend.at(static_cast<std::size_t>(level)).forward(compress[level].forward(f, phase));
}

GroupedFeatures Decoder::prefuse(const HierarchySet& fused, Phase phase) const {
  if (!fused.f6.defined()) throw ShapeMismatch("decoder needs the pyramid-pooling feature");
  GroupedFeatures g;
  g.low = compressed(0, fused.f[0], phase);
  g.low = add(g.low, resample(compressed(1, fused.f[1], phase), Ratio{2, 1}));
  g.low = add(g.low, resample(compressed(2, fused.f[2], phase), Ratio{4, 1}));
  g.high = compressed(3, fused.f[3], phase);
  g.high = add(g.high, compressed(4, fused.f[4], phase));
  g.high = add(g.high, compressed(5, fused.f6, phase));
  return g;
}

Tensor Decoder::fullfuse(const GroupedFeatures& g, Phase phase) const {
  Tensor x = concat_channels({g.low, resample(g.high, Ratio{8, 1})});
  return predict.forward(refine2.forward(refine1.forward(x, phase), phase));
}

}  // namespace dfmnet
