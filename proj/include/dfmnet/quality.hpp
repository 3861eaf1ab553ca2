// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfmnet/model.hpp"
#include "dfmnet/random.hpp"
#include "dfmnet/tensor.hpp"

namespace dfmnet {

/// Luminance (0.299 R + 0.587 G + 0.114 B) of a 3 x H x W image, 1 x H x W.
Tensor to_gray(const Tensor& rgb);

/// Sobel gradient magnitude with replicated borders, divided by its maximum
/// (all zeros when the image is constant). Input: one H x W channel.
Tensor edge_map(const Tensor& image);

/// Boundary alignment of two edge maps:
///   C = 2 sum(a * b) / (sum(a^2) + sum(b^2) + eps).
double dice_alignment(const Tensor& a, const Tensor& b, double eps = 1e-8);

/// A random permutation with no fixed points (Sattolo's algorithm). n >= 2.
std::vector<std::size_t> derangement(std::size_t n, Rng& rng);

struct QualityPair {
  std::string id;
  Tensor rgb;    // 3 x H x W
  Tensor depth;  // 1 x H x W (or 3 x H x W flow)
};

struct QualityEntry {
  std::string id;
  std::string depth_id;  // differs from id after shuffling
  double c_dice = 0.0;
  std::optional<double> alpha_bar;
};

inline constexpr int kHistogramBins = 20;

struct DistributionSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  std::array<std::int64_t, kHistogramBins> histogram{};  // uniform bins on [0,1]
};

DistributionSummary summarize(const std::vector<double>& values);

struct QualityReport {
  std::vector<QualityEntry> entries;
  DistributionSummary c_dice;
  std::optional<DistributionSummary> alpha_bar;
};

struct AuditOptions {
  bool shuffle = false;
  std::uint64_t seed = 0;
  /// When set (and the model has DQW), each entry also records the mean
  /// depth weight the model assigns to the pair.
  const DfmNet* alpha_model = nullptr;
};

/// Edge-alignment audit. With `shuffle` each RGB image is paired with the
/// depth map of another pair (a derangement); the images themselves are
/// untouched. Throws EmptySet for no pairs, or fewer than two when shuffling.
QualityReport audit_set(const std::vector<QualityPair>& pairs, const AuditOptions& options = {});

/// Mean depth weight for one (rgb, aux) pair, both without batch axis.
double alpha_bar(const DfmNet& net, const Tensor& rgb, const Tensor& aux);

/// One-sided Welch two-sample t-test of mean(a) > mean(b).
struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dfmnet
