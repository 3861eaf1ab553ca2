// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "dfmnet/dqfm.hpp"
#include "dfmnet/error.hpp"
#include "dfmnet/quality.hpp"
#include "dfmnet/synthetic.hpp"
#include "support/compare.hpp"
#include "support/gradcheck.hpp"

using namespace dfmnet;
using dfmnet::testing::bit_equal;
using dfmnet::testing::max_abs_diff;
using dfmnet::testing::max_value;
using dfmnet::testing::min_value;
using dfmnet::testing::random_tensor;

namespace {

// Per-channel constant map: channel c holds values[c].
Tensor channel_constants(std::int64_t n, const std::vector<float>& values, std::int64_t h, std::int64_t w) {
  const auto c = static_cast<std::int64_t>(values.size());
  Tensor t = Tensor::zeros({n, c, h, w});
  auto d = t.mutable_data();
  for (std::int64_t i = 0; i < n * c; ++i) {
    for (std::int64_t p = 0; p < h * w; ++p) d[static_cast<std::size_t>(i * h * w + p)] = values[static_cast<std::size_t>(i % c)];
  }
  return t;
}

// Copies sample `from` of `src` into sample `to` of `dst`.
void copy_sample(const Tensor& src, std::int64_t from, Tensor& dst, std::int64_t to) {
  const std::int64_t block = src.numel() / src.dim(0);
  std::copy_n(src.data().data() + from * block, block, dst.mutable_data().data() + to * block);
}

class Gates : public ::testing::Test {
 protected:
  ParamStore store;
  Rng rng{5};
  DepthQualityWeighting dqw = DepthQualityWeighting::create(store, rng, "dqw");
  DepthHolisticAttention dha = DepthHolisticAttention::create(store, rng, "dha");
};

}  // namespace

TEST(AlignmentVector, EqualConstantMapsGiveHalfTheValue) {
  const std::vector<float> c = {0.5f, 1.0f, 2.0f, 3.25f};
  const Tensor a = channel_constants(2, c, 6, 6);
  const Tensor v = alignment_vector(a, a, VbaVariant::kProposed);
  ASSERT_EQ(v.shape(), (Shape{2, 4, 1, 1}));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(v.data()[i], c[i % 4] / 2.0f, 1e-6f * c[i % 4]);

  const Tensor dice = alignment_vector(a, a, VbaVariant::kDice);
  const Tensor sum = alignment_vector(a, a, VbaVariant::kAdd);
  const Tensor prod = alignment_vector(a, a, VbaVariant::kMul);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(dice.data()[i], 1.0f, 1e-6f);
    EXPECT_FLOAT_EQ(sum.data()[i], 2.0f * c[i % 4]);
    EXPECT_FLOAT_EQ(prod.data()[i], c[i % 4] * c[i % 4]);
  }
}

TEST(AlignmentVector, ZeroRgbFeaturesGiveZeroRegardlessOfDepth) {
  Rng rng(1);
  const Tensor zero = Tensor::zeros({1, 16, 8, 8});
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor v = alignment_vector(zero, random_tensor(rng, {1, 16, 8, 8}, 0.0, 3.0), VbaVariant::kProposed);
    EXPECT_EQ(min_value(v), 0.0f);
    EXPECT_EQ(max_value(v), 0.0f);
  }
  // All-zero both sides stays finite thanks to eps.
  EXPECT_EQ(max_value(alignment_vector(zero, zero, VbaVariant::kProposed)), 0.0f);
  EXPECT_THROW(alignment_vector(zero, Tensor::zeros({1, 16, 4, 4}), VbaVariant::kProposed), ShapeMismatch);
}

TEST(AlignmentVector, AlignedBoundariesScoreHigherThanShuffled) {
  SceneOptions options;
  options.size = 64;
  const std::vector<Sample> scenes = synthetic_dataset(200, 17, InputMode::kRgbd, options);
  Rng rng(2);
  const std::vector<std::size_t> other = derangement(scenes.size(), rng);
  std::vector<Tensor> rgb_edges, depth_edges;
  for (const auto& s : scenes) {
    rgb_edges.push_back(edge_map(to_gray(s.rgb)).reshape({1, 1, 64, 64}));
    depth_edges.push_back(edge_map(s.aux).reshape({1, 1, 64, 64}));
  }
  std::vector<double> aligned, shuffled;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    aligned.push_back(alignment_vector(rgb_edges[i], depth_edges[i], VbaVariant::kProposed).item());
    shuffled.push_back(alignment_vector(rgb_edges[i], depth_edges[other[i]], VbaVariant::kProposed).item());
  }
  const WelchResult w = welch_t_test(aligned, shuffled);
  EXPECT_GT(summarize(aligned).mean, summarize(shuffled).mean);
  EXPECT_LT(w.p, 0.01);
}

TEST(Variants, ParseAndPrintRoundTrip) {
  for (VbaVariant v : {VbaVariant::kProposed, VbaVariant::kDice, VbaVariant::kAdd, VbaVariant::kMul}) {
    EXPECT_EQ(parse_vba_variant(to_string(v)), v);
  }
  for (Gating g : {Gating::kMultiple, Gating::kIdentical}) EXPECT_EQ(parse_gating(to_string(g)), g);
  EXPECT_THROW(parse_vba_variant("sum"), InvalidConfig);
  EXPECT_THROW(parse_gating("shared"), InvalidConfig);
}

TEST_F(Gates, DepthWeightingShapeRangeAndSize) {
  const Tensor f_r1 = random_tensor(rng, {2, 16, 32, 32}, -3.0, 3.0);
  const Tensor f_d1 = random_tensor(rng, {2, 16, 32, 32}, -3.0, 3.0);
  EXPECT_EQ(dqw.multiscale_alignment(f_r1, f_d1, VbaVariant::kProposed, Phase::kInference).shape(),
            (Shape{2, 48, 1, 1}));
  for (VbaVariant v : {VbaVariant::kProposed, VbaVariant::kDice, VbaVariant::kAdd, VbaVariant::kMul}) {
    const AlphaVector a = dqw.forward(f_r1, f_d1, v, Phase::kInference);
    ASSERT_EQ(a.alpha.shape(), (Shape{2, 5, 1, 1}));
    EXPECT_GT(min_value(a.alpha), 0.0f);
    EXPECT_LT(max_value(a.alpha), 1.0f);
    EXPECT_GT(a.mean(1), 0.0f);
    EXPECT_LT(a.mean(1), 1.0f);
  }
  EXPECT_LT(4.0 * static_cast<double>(store.count("dqw.")) / 1e6, 0.01);
}

TEST_F(Gates, DepthWeightingIsPerSample) {
  const Tensor f_r1 = random_tensor(rng, {3, 16, 16, 16});
  const Tensor f_d1 = random_tensor(rng, {3, 16, 16, 16});
  const std::int64_t order[3] = {2, 0, 1};
  Tensor r_perm = Tensor::zeros(f_r1.shape()), d_perm = Tensor::zeros(f_d1.shape());
  for (std::int64_t i = 0; i < 3; ++i) {
    copy_sample(f_r1, order[i], r_perm, i);
    copy_sample(f_d1, order[i], d_perm, i);
  }
  const AlphaVector a = dqw.forward(f_r1, f_d1, VbaVariant::kProposed, Phase::kInference);
  const AlphaVector b = dqw.forward(r_perm, d_perm, VbaVariant::kProposed, Phase::kInference);
  for (std::int64_t i = 0; i < 3; ++i) {
    for (int h = 0; h < kHierarchies; ++h) EXPECT_EQ(b.value(i, h), a.value(order[i], h));
  }
}

TEST_F(Gates, AttentionMapsExtentsRangeAndResampling) {
  const Tensor f_r1 = random_tensor(rng, {1, 16, 128, 128});
  const Tensor f_d1 = random_tensor(rng, {1, 16, 128, 128});
  const Tensor f_d5 = random_tensor(rng, {1, 320, 16, 16});
  const BetaMaps beta = dha.forward(f_r1, f_d1, f_d5, 2, Phase::kInference);
  EXPECT_EQ(beta.full.shape(), (Shape{1, 1, 128, 128}));
  const std::int64_t extents[kHierarchies] = {128, 64, 32, 16, 16};
  for (int i = 0; i < kHierarchies; ++i) {
    EXPECT_EQ(beta.maps[i].shape(), (Shape{1, 1, extents[i], extents[i]}));
    EXPECT_TRUE(bit_equal(beta.maps[i], resample(beta.full, beta_factor(i))));
    EXPECT_GT(min_value(beta.maps[i]), 0.0f);
    EXPECT_LT(max_value(beta.maps[i]), 1.0f);
  }
  EXPECT_TRUE(bit_equal(beta.maps[0], beta.full));
}

TEST_F(Gates, ZeroRecalibrationUsesUpsampledDeepFeatureDirectly) {
  const Tensor f_r1 = random_tensor(rng, {1, 16, 64, 64});
  const Tensor f_d1 = random_tensor(rng, {1, 16, 64, 64});
  const Tensor f_d5 = random_tensor(rng, {1, 320, 8, 8});
  const Tensor f_ec = dha.cross_modal(f_r1, f_d1, Phase::kInference);
  const Tensor f_dht = resample(dha.transfer_deep.forward(f_d5, Phase::kInference), Ratio{8, 1});
  const Tensor direct = dha.attention.forward(add(f_ec, f_dht), Phase::kInference);
  EXPECT_TRUE(bit_equal(dha.forward(f_r1, f_d1, f_d5, 0, Phase::kInference).full, direct));
  EXPECT_FALSE(bit_equal(dha.forward(f_r1, f_d1, f_d5, 1, Phase::kInference).full, direct));
  EXPECT_THROW(dha.forward(f_r1, f_d1, f_d5, 4, Phase::kInference), InvalidConfig);
  EXPECT_THROW(dha.forward(f_r1, f_d1, random_tensor(rng, {1, 320, 16, 16}), 2, Phase::kInference), ShapeMismatch);
}

TEST(Fuse, GateIdentities) {
  Rng rng(3);
  const Tensor f_r = random_tensor(rng, {2, 8, 6, 6});
  const Tensor f_d = random_tensor(rng, {2, 8, 6, 6});
  const Tensor beta = random_tensor(rng, {2, 1, 6, 6}, 0.01, 0.99);
  const Tensor ones = Tensor::ones({2, 1, 6, 6});

  EXPECT_TRUE(bit_equal(fuse(f_r, f_d, Tensor::zeros({2, 1, 1, 1}), beta), f_r));
  EXPECT_TRUE(bit_equal(fuse(f_r, f_d, Tensor::ones({2, 1, 1, 1}), ones), add(f_r, f_d)));
  EXPECT_TRUE(bit_equal(fuse(f_r, f_d, Tensor(), Tensor()), add(f_r, f_d)));

  const Tensor half = fuse(Tensor::zeros({1, 4, 3, 3}), Tensor::full({1, 4, 3, 3}, 2.0f),
                           Tensor::full({1, 1, 1, 1}, 0.5f), Tensor::ones({1, 1, 3, 3}));
  EXPECT_EQ(min_value(half), 1.0f);
  EXPECT_EQ(max_value(half), 1.0f);

  EXPECT_THROW(fuse(f_r, random_tensor(rng, {2, 8, 3, 3}), Tensor(), Tensor()), ShapeMismatch);
  EXPECT_THROW(fuse(f_r, f_d, Tensor(), Tensor::ones({2, 1, 3, 3})), ShapeMismatch);
}

TEST(Fuse, DepthContributionIsLinearInAlpha) {
  Rng rng(4);
  const Tensor zero = Tensor::zeros({1, 8, 5, 5});
  const Tensor f_r = random_tensor(rng, {1, 8, 5, 5});
  const Tensor f_d = random_tensor(rng, {1, 8, 5, 5});
  const Tensor beta = random_tensor(rng, {1, 1, 5, 5}, 0.0, 1.0);
  for (float alpha : {0.1f, 0.3f, 0.45f}) {
    const Tensor once = fuse(zero, f_d, Tensor::full({1, 1, 1, 1}, alpha), beta);
    const Tensor twice = fuse(zero, f_d, Tensor::full({1, 1, 1, 1}, 2.0f * alpha), beta);
    EXPECT_TRUE(bit_equal(twice, mul_scalar(once, 2.0f)));
    // With nonzero RGB features the difference is linear up to rounding.
    const Tensor d1 = sub(fuse(f_r, f_d, Tensor::full({1, 1, 1, 1}, alpha), beta), f_r);
    const Tensor d2 = sub(fuse(f_r, f_d, Tensor::full({1, 1, 1, 1}, 2.0f * alpha), beta), f_r);
    EXPECT_LT(max_abs_diff(d2, mul_scalar(d1, 2.0f)), 1e-6);
  }
}
