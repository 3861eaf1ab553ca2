// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dfmnet/model.hpp"
#include "dfmnet/random.hpp"

namespace dfmnet {

/// One training/evaluation example without batch axis: rgb 3 x H x W,
/// aux (depth 1 x H x W or flow 3 x H x W), gt 1 x H x W with values in {0,1}.
struct Sample {
  std::string id;
  Tensor rgb;
  Tensor aux;
  Tensor gt;
};

/// Stacks samples along a new leading batch axis.
struct Batch {
  Tensor rgb;
  Tensor aux;
  Tensor gt;
};
Batch make_batch(const std::vector<const Sample*>& samples);

/// lr(t) = base * (1 - t / total)^power.
double poly_lr(double base, std::int64_t t, std::int64_t total, double power = 0.9);

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Applies one update from the accumulated gradients (missing gradients
  /// count as zero).
  void step(double lr);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<float>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

/// Random horizontal flip (p = 0.5) and random crop covering at least
/// `min_crop` of each side, resized back to the original extents. GT is
/// re-binarized at 0.5 after resizing.
Sample augment(const Sample& s, Rng& rng, double min_crop = 0.75);

struct StepReport {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainOptions {
  std::int64_t steps = 0;  // total optimizer steps T
  int batch_size = 10;
  double base_lr = 1e-4;
  double lr_power = 0.9;
  bool augment = true;
  std::uint64_t seed = 0;
  std::function<void(const StepReport&)> on_step;
};

/// Steps needed to cover `epochs` passes over `samples` examples.
std::int64_t steps_for_epochs(std::int64_t epochs, std::size_t samples, int batch_size);

/// Trains `net` in place with Adam under the poly schedule. Batches are drawn
/// from a seeded reshuffle of the dataset each epoch; results are bit-identical
/// for equal seeds. Returns the per-step losses. Throws EmptyDataset.
std::vector<double> train(DfmNet& net, const std::vector<Sample>& dataset, const TrainOptions& options);

/// Pairs each RGB image with an all-black 3-channel flow map. Throws
/// ModeMismatch unless `mode` is flow3.
std::vector<Sample> make_joint_pairs(const std::vector<Sample>& rgb_only, InputMode mode);

/// Concatenation of both sets in a seeded uniform shuffle.
std::vector<Sample> mix_samples(const std::vector<Sample>& a, const std::vector<Sample>& b, std::uint64_t seed);

}  // namespace dfmnet
