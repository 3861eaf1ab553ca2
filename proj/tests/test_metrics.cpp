// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "dfmnet/error.hpp"
#include "dfmnet/metrics.hpp"
#include "dfmnet/random.hpp"
#include "support/gradcheck.hpp"

using namespace dfmnet;
using dfmnet::testing::random_tensor;

namespace {

Tensor square_mask(std::int64_t size, std::int64_t lo, std::int64_t hi) {
  Tensor g = Tensor::zeros({size, size});
  auto d = g.mutable_data();
  for (std::int64_t y = lo; y < hi; ++y) {
    for (std::int64_t x = lo; x < hi; ++x) d[static_cast<std::size_t>(y * size + x)] = 1.0f;
  }
  return g;
}

Tensor random_mask(Rng& rng, std::int64_t size) {
  Tensor g = Tensor::zeros({size, size});
  for (float& v : g.mutable_data()) v = static_cast<float>(rng.below(2));
  return g;
}

Tensor inverted(const Tensor& g) {
  Tensor s = Tensor::zeros(g.shape());
  auto d = s.mutable_data();
  auto gd = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = 1.0f - gd[i];
  return s;
}

// Applies the same pixel permutation to every map.
Tensor permuted(const Tensor& t, const std::vector<std::size_t>& perm) {
  Tensor out = Tensor::zeros(t.shape());
  auto d = out.mutable_data();
  auto s = t.data();
  for (std::size_t i = 0; i < perm.size(); ++i) d[i] = s[perm[i]];
  return out;
}

}  // namespace

TEST(Mae, TrivialCases) {
  const Tensor g = square_mask(8, 2, 6);
  EXPECT_EQ(mae(g, g), 0.0);
  EXPECT_EQ(mae(inverted(g), g), 1.0);
  EXPECT_NEAR(mae(Tensor::from({1, 2}, {0.2f, 0.8f}), Tensor::from({1, 2}, {0.0f, 1.0f})), 0.2, 1e-7);
  EXPECT_THROW(mae(g, Tensor::zeros({4, 4})), ShapeMismatch);
}

TEST(FMeasure, TrivialCases) {
  const Tensor g = square_mask(8, 2, 6);
  EXPECT_DOUBLE_EQ(f_measure_max(g, g), 1.0);
  EXPECT_EQ(f_measure_max(Tensor::zeros({8, 8}), g), 0.0);
  const Tensor s = Tensor::from({2, 2}, {0.9f, 0.1f, 0.1f, 0.9f});
  const Tensor g2 = Tensor::from({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  EXPECT_DOUBLE_EQ(f_measure_max(s, g2), 1.0);
  EXPECT_THROW(f_measure_max(g, Tensor::zeros({4, 4})), ShapeMismatch);
}

TEST(StructureAndAlignment, PerfectAndInvertedMaps) {
  const Tensor g = square_mask(8, 2, 6);
  EXPECT_NEAR(s_measure(g, g), 1.0, 1e-12);
  EXPECT_NEAR(e_measure_max(g, g), 1.0, 1e-12);
  EXPECT_LT(s_measure(inverted(g), g), 0.5);
  EXPECT_LT(e_measure_max(inverted(g), g), 0.5);
  EXPECT_THROW(s_measure(g, Tensor::zeros({4, 4})), ShapeMismatch);
  EXPECT_THROW(e_measure_max(g, Tensor::zeros({4, 4})), ShapeMismatch);
}

TEST(StructureMeasure, DegenerateGroundTruth) {
  Rng rng(1);
  const Tensor s = random_tensor(rng, {8, 8}, 0.0, 1.0);
  double mean = 0.0;
  for (float v : s.data()) mean += v;
  mean /= 64.0;
  EXPECT_NEAR(s_measure(s, Tensor::zeros({8, 8})), 1.0 - mean, 1e-6);
  EXPECT_NEAR(s_measure(s, Tensor::ones({8, 8})), mean, 1e-6);
}

TEST(Metrics, RangeOnRandomPairs) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Tensor s = random_tensor(rng, {16, 16}, 0.0, 1.0);
    const Tensor g = random_mask(rng, 16);
    const EvalResult r = evaluate(s, g);
    for (double v : {r.s_alpha, r.f_beta_max, r.e_xi_max, r.mae}) {
      EXPECT_GE(v, 0.0) << "pair " << i;
      EXPECT_LE(v, 1.0) << "pair " << i;
    }
  }
}

TEST(Metrics, SweepResolutionDoesNotMatterOnQuantizedMaps) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    Tensor s = Tensor::zeros({8, 8});
    for (float& v : s.mutable_data()) v = static_cast<float>(rng.below(256)) / 255.0f;
    const Tensor g = random_mask(rng, 8);
    EXPECT_NEAR(f_measure_max(s, g, 256), f_measure_max(s, g, 1024), 1e-3);
    EXPECT_NEAR(e_measure_max(s, g, 256), e_measure_max(s, g, 1024), 1e-3);
  }
}

TEST(Metrics, MaeAndFIgnorePixelOrder) {
  Rng rng(4);
  const Tensor s = random_tensor(rng, {8, 8}, 0.0, 1.0);
  const Tensor g = random_mask(rng, 8);
  std::vector<std::size_t> perm(64);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  EXPECT_EQ(mae(permuted(s, perm), permuted(g, perm)), mae(s, g));
  EXPECT_EQ(f_measure_max(permuted(s, perm), permuted(g, perm)), f_measure_max(s, g));
}

TEST(FMeasure, ImprovesAsPredictionApproachesTruth) {
  Rng rng(5);
  const Tensor g = random_mask(rng, 8);
  Tensor s = random_tensor(rng, {8, 8}, 0.0, 1.0);
  double prev = f_measure_max(s, g);
  for (int step = 0; step < 10; ++step) {
    auto d = s.mutable_data();
    auto gd = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 0.2f * (gd[i] - d[i]);
    const double cur = f_measure_max(s, g);
    EXPECT_GE(cur, prev - 1e-12);
    prev = cur;
  }
}

TEST(Metrics, MeanResult) {
  const EvalResult a{0.5, 0.6, 0.7, 0.1};
  const EvalResult b{0.7, 0.8, 0.9, 0.3};
  const EvalResult m = mean_result({a, b});
  EXPECT_DOUBLE_EQ(m.s_alpha, 0.6);
  EXPECT_DOUBLE_EQ(m.mae, 0.2);
  EXPECT_THROW(mean_result({}), EmptySet);
}
