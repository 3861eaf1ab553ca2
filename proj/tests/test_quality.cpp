// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>

#include "dfmnet/error.hpp"
#include "dfmnet/quality.hpp"
#include "dfmnet/synthetic.hpp"
#include "support/compare.hpp"
#include "support/gradcheck.hpp"

using namespace dfmnet;
using dfmnet::testing::bit_equal;
using dfmnet::testing::max_value;
using dfmnet::testing::min_value;
using dfmnet::testing::random_tensor;

namespace {

std::vector<QualityPair> synthetic_pairs(int count, std::int64_t size) {
  SceneOptions opt;
  opt.size = size;
  std::vector<QualityPair> pairs;
  for (const Sample& s : synthetic_dataset(count, 21, InputMode::kRgbd, opt)) pairs.push_back({s.id, s.rgb, s.aux});
  return pairs;
}

}  // namespace

TEST(EdgeMap, ConstantImageHasNoEdges) {
  const Tensor e = edge_map(Tensor::full({1, 16, 16}, 0.4f));
  EXPECT_EQ(max_value(e), 0.0f);
  EXPECT_EQ(min_value(e), 0.0f);
}

TEST(EdgeMap, VerticalStepPeaksAtTheStep) {
  Tensor img = Tensor::zeros({1, 16, 16});
  auto d = img.mutable_data();
  for (std::int64_t y = 0; y < 16; ++y) {
    for (std::int64_t x = 8; x < 16; ++x) d[static_cast<std::size_t>(y * 16 + x)] = 1.0f;
  }
  const Tensor e = edge_map(img);
  auto ed = e.data();
  for (std::int64_t y = 0; y < 16; ++y) {
    for (std::int64_t x = 0; x < 16; ++x) {
      const float v = ed[static_cast<std::size_t>(y * 16 + x)];
      if (x == 7 || x == 8) {
        EXPECT_EQ(v, 1.0f) << y << "," << x;
      } else {
        EXPECT_EQ(v, 0.0f) << y << "," << x;
      }
    }
  }
}

TEST(EdgeMap, RangeAndChannelCheck) {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const Tensor e = edge_map(random_tensor(rng, {1, 12, 20}, 0.0, 1.0));
    EXPECT_GE(min_value(e), 0.0f);
    EXPECT_EQ(max_value(e), 1.0f);
  }
  EXPECT_THROW(edge_map(Tensor::zeros({3, 8, 8})), ShapeMismatch);
}

TEST(DiceAlignment, ListedExamples) {
  const Tensor e = Tensor::from({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  EXPECT_NEAR(dice_alignment(e, Tensor::from({2, 2}, {1.0f, 1.0f, 0.0f, 0.0f})), 0.5, 1e-8);
  EXPECT_NEAR(dice_alignment(e, e), 1.0, 1e-8);
  EXPECT_EQ(dice_alignment(e, Tensor::from({2, 2}, {0.0f, 1.0f, 1.0f, 0.0f})), 0.0);
  EXPECT_EQ(dice_alignment(Tensor::zeros({2, 2}), Tensor::zeros({2, 2})), 0.0);
  EXPECT_THROW(dice_alignment(e, Tensor::zeros({3, 3})), ShapeMismatch);
}

TEST(DiceAlignment, SymmetryPermutationAndScale) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Tensor a = random_tensor(rng, {8, 8}, 0.0, 1.0);
    const Tensor b = random_tensor(rng, {8, 8}, 0.0, 1.0);
    const double c = dice_alignment(a, b);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    EXPECT_EQ(dice_alignment(b, a), c);

    std::vector<std::size_t> perm(64);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    Tensor pa = Tensor::zeros({8, 8});
    Tensor pb = Tensor::zeros({8, 8});
    for (std::size_t k = 0; k < 64; ++k) {
      pa.mutable_data()[k] = a.data()[perm[k]];
      pb.mutable_data()[k] = b.data()[perm[k]];
    }
    EXPECT_NEAR(dice_alignment(pa, pb), c, 1e-12);
    EXPECT_NEAR(dice_alignment(mul_scalar(a, 0.25f), mul_scalar(b, 0.25f)), c, 1e-6);
  }
}

TEST(Derangement, HasNoFixedPoints) {
  Rng rng(3);
  for (std::size_t n = 2; n < 40; ++n) {
    const std::vector<std::size_t> p = derangement(n, rng);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NE(p[i], i);
      EXPECT_EQ(sorted[i], i);
    }
  }
}

TEST(AuditSet, SinglePairReportsExactValue) {
  const std::vector<QualityPair> pairs = synthetic_pairs(1, 32);
  const QualityReport r = audit_set(pairs);
  ASSERT_EQ(r.entries.size(), 1u);
  const double direct = dice_alignment(edge_map(to_gray(pairs[0].rgb)), edge_map(pairs[0].depth));
  EXPECT_EQ(r.entries[0].c_dice, direct);
  EXPECT_EQ(r.c_dice.mean, direct);
  EXPECT_EQ(std::accumulate(r.c_dice.histogram.begin(), r.c_dice.histogram.end(), std::int64_t{0}), 1);
  EXPECT_FALSE(r.alpha_bar.has_value());
}

TEST(AuditSet, ShufflingOnlyChangesThePairing) {
  const std::vector<QualityPair> pairs = synthetic_pairs(12, 32);
  std::vector<Tensor> depth_before;
  for (const QualityPair& p : pairs) depth_before.push_back(edge_map(p.depth));
  AuditOptions opt;
  opt.shuffle = true;
  opt.seed = 4;
  const QualityReport r = audit_set(pairs, opt);
  ASSERT_EQ(r.entries.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const QualityEntry& e = r.entries[i];
    EXPECT_EQ(e.id, pairs[i].id);
    EXPECT_NE(e.depth_id, e.id);
    std::size_t j = 0;
    while (pairs[j].id != e.depth_id) ++j;
    EXPECT_EQ(e.c_dice, dice_alignment(edge_map(to_gray(pairs[i].rgb)), edge_map(pairs[j].depth)));
    EXPECT_TRUE(bit_equal(edge_map(pairs[i].depth), depth_before[i]));
  }
  EXPECT_EQ(std::accumulate(r.c_dice.histogram.begin(), r.c_dice.histogram.end(), std::int64_t{0}), 12);
}

TEST(AuditSet, Errors) {
  EXPECT_THROW(audit_set({}), EmptySet);
  AuditOptions opt;
  opt.shuffle = true;
  EXPECT_THROW(audit_set(synthetic_pairs(1, 32), opt), EmptySet);
}

TEST(AuditSet, AlignedPairsBeatShuffledPairs) {
  const std::vector<QualityPair> pairs = synthetic_pairs(200, 64);
  const QualityReport aligned = audit_set(pairs);
  AuditOptions opt;
  opt.shuffle = true;
  opt.seed = 5;
  const QualityReport shuffled = audit_set(pairs, opt);
  std::vector<double> a, b;
  for (const auto& e : aligned.entries) a.push_back(e.c_dice);
  for (const auto& e : shuffled.entries) b.push_back(e.c_dice);
  const WelchResult w = welch_t_test(a, b);
  EXPECT_GT(aligned.c_dice.mean, shuffled.c_dice.mean);
  EXPECT_LT(w.p, 0.01);
}

TEST(Summary, MomentsAndHistogram) {
  const DistributionSummary s = summarize({0.0, 0.5, 1.0, 0.52});
  EXPECT_DOUBLE_EQ(s.mean, 0.505);
  EXPECT_EQ(s.histogram[0], 1);
  EXPECT_EQ(s.histogram[10], 2);
  EXPECT_EQ(s.histogram[kHistogramBins - 1], 1);
  EXPECT_THROW(summarize({}), EmptySet);
}

TEST(WelchTest, KnownSeparation) {
  const std::vector<double> a{5.1, 4.9, 5.0, 5.2, 4.8};
  const std::vector<double> b{1.0, 1.2, 0.8, 1.1, 0.9};
  const WelchResult w = welch_t_test(a, b);
  EXPECT_GT(w.t, 10.0);
  EXPECT_LT(w.p, 1e-6);
  EXPECT_GT(welch_t_test(b, a).p, 0.99);
}
