// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dfmnet/tensor.hpp"

namespace dfmnet {

// Saliency metrics on a single map S in [0,1] against a binary mask G.
// Both are H x W (any leading axes must have extent 1). Threshold sweeps use
// t_k = k / (levels - 1), k = 0..levels-1, and binarize as S > t_k.

inline constexpr int kThresholdLevels = 256;
inline constexpr double kFBetaSquared = 0.3;

double mae(const Tensor& s, const Tensor& g);

/// Maximum F-measure over the sweep; a threshold with no positive
/// prediction scores 0.
double f_measure_max(const Tensor& s, const Tensor& g, int levels = kThresholdLevels);

/// Structure measure: 0.5 * object-aware + 0.5 * region-aware similarity.
/// All-zero G scores 1 - mean(S); all-one G scores mean(S). Clamped to [0,1].
double s_measure(const Tensor& s, const Tensor& g);

/// Maximum enhanced-alignment measure over the sweep, clamped to [0,1].
double e_measure_max(const Tensor& s, const Tensor& g, int levels = kThresholdLevels);

struct EvalResult {
  double s_alpha = 0.0;
  double f_beta_max = 0.0;
  double e_xi_max = 0.0;
  double mae = 0.0;
};

EvalResult evaluate(const Tensor& s, const Tensor& g);

/// Per-field mean. Throws EmptySet for an empty list.
EvalResult mean_result(const std::vector<EvalResult>& results);

}  // namespace dfmnet
