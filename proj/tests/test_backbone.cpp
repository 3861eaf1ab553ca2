// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>

#include "dfmnet/backbone.hpp"
#include "dfmnet/error.hpp"
#include "dfmnet/model.hpp"
#include "support/compare.hpp"
#include "support/gradcheck.hpp"

using namespace dfmnet;
using dfmnet::testing::max_value;
using dfmnet::testing::min_value;
using dfmnet::testing::random_tensor;

namespace {

struct Row {
  Shape in;
  Shape out;
};

// Input -> output of each depth-backbone row at a 256 x 256 depth map.
const std::array<Row, kHierarchies> kTableRows = {{
    {{1, 1, 256, 256}, {1, 16, 128, 128}},
    {{1, 16, 128, 128}, {1, 24, 64, 64}},
    {{1, 24, 64, 64}, {1, 32, 32, 32}},
    {{1, 32, 32, 32}, {1, 96, 16, 16}},
    {{1, 96, 16, 16}, {1, 320, 16, 16}},
}};

}  // namespace

TEST(TdbSpec, StandardRowsAndBlockCount) {
  const TdbSpec spec = TdbSpec::standard(1);
  ASSERT_EQ(spec.rows.size(), 5u);
  const IrbConfig expected[5] = {{3, 16, 1, 2}, {3, 24, 3, 2}, {3, 32, 7, 2}, {2, 96, 3, 2}, {2, 320, 1, 1}};
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(spec.rows[i].t, expected[i].t);
    EXPECT_EQ(spec.rows[i].c, expected[i].c);
    EXPECT_EQ(spec.rows[i].n, expected[i].n);
    EXPECT_EQ(spec.rows[i].s, expected[i].s);
    EXPECT_EQ(spec.rows[i].c, kHierarchyChannels[static_cast<std::size_t>(i)]);
  }
  EXPECT_EQ(spec.block_count(), 15);
  EXPECT_NO_THROW(spec.validate());
  TdbSpec broken = spec;
  broken.rows.pop_back();
  EXPECT_THROW(broken.validate(), InvalidConfig);
}

TEST(TailoredDepthBackbone, StepShapesReproduceEveryTableRow) {
  ParamStore store;
  Rng rng(1);
  Encoder tdb = Encoder::tailored(store, rng, "tdb", TdbSpec::standard(1));
  for (int i = 0; i < kHierarchies; ++i) {
    const Row& row = kTableRows[static_cast<std::size_t>(i)];
    EXPECT_EQ(tdb.step(i, Tensor::zeros(row.in), Phase::kInference).shape(), row.out) << "row " << i + 1;
  }
}

TEST(TailoredDepthBackbone, ForwardTraceAndFlowInput) {
  ParamStore store;
  Rng rng(2);
  Encoder tdb = Encoder::tailored(store, rng, "tdb", TdbSpec::standard(3));
  const HierarchySet h = tdb.forward(random_tensor(rng, {2, 3, 256, 256}, 0.0, 1.0), Phase::kInference);
  for (int i = 0; i < kHierarchies; ++i) {
    Shape out = kTableRows[static_cast<std::size_t>(i)].out;
    out[0] = 2;
    EXPECT_EQ(h.f[static_cast<std::size_t>(i)].shape(), out);
  }
  EXPECT_THROW(tdb.forward(Tensor::zeros({1, 1, 256, 256}), Phase::kInference), ShapeMismatch);
  EXPECT_THROW(tdb.forward(Tensor::zeros({1, 3, 100, 100}), Phase::kInference), ShapeMismatch);
}

TEST(TailoredDepthBackbone, SizeNearBudget) {
  ParamStore store;
  Rng rng(3);
  Encoder::tailored(store, rng, "tdb", TdbSpec::standard(1));
  const double mb = 4.0 * static_cast<double>(store.count("tdb.")) / 1e6;
  EXPECT_NEAR(mb, 0.9, 0.9 * 0.15);
}

TEST(RgbBranch, HierarchyStepsFollowChannelAndStrideSchedule) {
  ParamStore store;
  Rng rng(4);
  Encoder rgb = Encoder::mobilenet(store, rng, "rgb", 3);
  Tensor x = Tensor::zeros({1, 3, 256, 256});
  for (int i = 0; i < kHierarchies; ++i) {
    x = rgb.step(i, x, Phase::kInference);
    const std::int64_t extent = 256 / kHierarchyStride[static_cast<std::size_t>(i)];
    EXPECT_EQ(x.shape(), (Shape{1, kHierarchyChannels[static_cast<std::size_t>(i)], extent, extent}));
  }
  EXPECT_THROW(rgb.step(5, x, Phase::kInference), InvalidConfig);
}

TEST(DepthBackbone, SwappingForMobileNetOnlyChangesDepthSubtree) {
  ModelConfig tailored;
  ModelConfig mobile;
  mobile.depth_backbone = DepthBackboneKind::kMobileNet;
  const DfmNet a(tailored, 5);
  const DfmNet b(mobile, 5);

  std::map<std::string, Shape> outside_a, outside_b;
  for (const auto& e : a.weights().entries()) {
    if (e.name.rfind("tdb.", 0) != 0) outside_a[e.name] = e.tensor.shape();
  }
  for (const auto& e : b.weights().entries()) {
    if (e.name.rfind("tdb.", 0) != 0) outside_b[e.name] = e.tensor.shape();
  }
  EXPECT_EQ(outside_a, outside_b);
  EXPECT_LT(a.weights().count("tdb."), b.weights().count("tdb."));

  Rng rng(6);
  const Tensor depth = random_tensor(rng, {1, 1, 64, 64}, 0.0, 1.0);
  const HierarchySet ha = a.depth_branch().forward(depth, Phase::kInference);
  const HierarchySet hb = b.depth_branch().forward(depth, Phase::kInference);
  for (int i = 0; i < kHierarchies; ++i) {
    EXPECT_EQ(ha.f[static_cast<std::size_t>(i)].shape(), hb.f[static_cast<std::size_t>(i)].shape());
  }
}

TEST(DepthHead, ShapeRangeAndZeroWeights) {
  ParamStore store;
  Rng rng(7);
  PredictionHead head = make_depth_head(store, rng, "heads.depth");
  const Tensor s = head.forward(random_tensor(rng, {2, 320, 16, 16}, -2.0, 2.0));
  EXPECT_EQ(s.shape(), (Shape{2, 1, 256, 256}));
  EXPECT_GT(min_value(s), 0.0f);
  EXPECT_LT(max_value(s), 1.0f);

  for (Tensor t : {head.weight, head.bias}) {
    auto d = t.mutable_data();
    std::fill(d.begin(), d.end(), 0.0f);
  }
  const Tensor half = head.forward(random_tensor(rng, {1, 320, 16, 16}));
  EXPECT_EQ(min_value(half), 0.5f);
  EXPECT_EQ(max_value(half), 0.5f);
  EXPECT_EQ(store.count("heads.depth."), 320 + 1);
}
