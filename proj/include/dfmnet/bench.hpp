// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfmnet/model.hpp"

namespace dfmnet {

/// Throughput S = N * B / T in frames per second, for N batched forward
/// passes of batch size B taking T seconds in total.
double throughput_fps(std::int64_t n, std::int64_t batch, double seconds);

struct ThroughputResult {
  std::int64_t batch = 1;
  std::int64_t n = 100;
  std::int64_t resolution = 256;
  double seconds = 0.0;
  double fps = 0.0;
};

struct BenchOptions {
  std::int64_t n = 100;
  std::int64_t resolution = 256;
  int warmup = 3;
  std::uint64_t seed = 0;  // fixed random input
};

/// Times `options.n` inference passes at batch `batch` after `warmup`
/// untimed passes. Throws InvalidConfig for batch < 1 or n < 1.
ThroughputResult measure_throughput(const DfmNet& net, std::int64_t batch, const BenchOptions& options = {});

/// Median single-image latency in milliseconds over `repeats` timed passes.
double median_latency_ms(const DfmNet& net, int repeats = 5, const BenchOptions& options = {});

/// Worker threads used by the engine (the kernels are single-threaded).
inline constexpr int kBenchThreads = 1;

struct SubtreeSize {
  std::string name;
  std::int64_t params = 0;
  std::int64_t bytes = 0;  // 4 * params at fp32
  double mb() const { return static_cast<double>(bytes) / 1e6; }
};

struct SizeReport {
  std::vector<SubtreeSize> subtrees;  // in kSubtrees order
  SubtreeSize total{"total"};
};

/// Exact enumeration of stored tensors per subtree (MB = 10^6 bytes).
SizeReport size_report(const ParamStore& weights);

}  // namespace dfmnet
