// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/bench.hpp"

#include <algorithm>
#include <chrono>

#include "dfmnet/error.hpp"
#include "dfmnet/random.hpp"

namespace dfmnet {

namespace {

using Clock = std::chrono::steady_clock;

Tensor random_input(Rng& rng, Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (float& v : t.mutable_data()) v = static_cast<float>(rng.uniform());
  return t;
}

struct Inputs {
  Tensor rgb;
  Tensor aux;
};

Inputs make_inputs(const DfmNet& net, std::int64_t batch, const BenchOptions& options) {
  Rng rng(options.seed);
  const std::int64_t r = options.resolution;
  return Inputs{random_input(rng, {batch, 3, r, r}), random_input(rng, {batch, net.config().aux_channels(), r, r})};
}

double timed_pass(const DfmNet& net, const Inputs& in) {
  const auto start = Clock::now();
  ForwardResult out = net.forward(in.rgb, in.aux, Phase::kInference);
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

double throughput_fps(std::int64_t n, std::int64_t batch, double seconds) {
  if (n < 1 || batch < 1) throw InvalidConfig("throughput needs N >= 1 and B >= 1");
  if (!(seconds > 0.0)) throw InvalidConfig("throughput needs a positive elapsed time");
  return static_cast<double>(n) * static_cast<double>(batch) / seconds;
}

ThroughputResult measure_throughput(const DfmNet& net, std::int64_t batch, const BenchOptions& options) {
  if (batch < 1 || options.n < 1) throw InvalidConfig("throughput needs N >= 1 and B >= 1");
  const Inputs in = make_inputs(net, batch, options);
  for (int i = 0; i < options.warmup; ++i) timed_pass(net, in);
  ThroughputResult r;
  r.batch = batch;
  r.n = options.n;
  r.resolution = options.resolution;
  const auto start = Clock::now();
  for (std::int64_t i = 0; i < options.n; ++i) net.forward(in.rgb, in.aux, Phase::kInference);
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  r.fps = throughput_fps(r.n, r.batch, r.seconds);
  return r;
}

double median_latency_ms(const DfmNet& net, int repeats, const BenchOptions& options) {
  if (repeats < 1) throw InvalidConfig("latency needs at least one repeat");
  const Inputs in = make_inputs(net, 1, options);
  for (int i = 0; i < options.warmup; ++i) timed_pass(net, in);
  std::vector<double> ms;
  for (int i = 0; i < repeats; ++i) ms.push_back(1e3 * timed_pass(net, in));
  std::sort(ms.begin(), ms.end());
  const std::size_t mid = ms.size() / 2;
  return ms.size() % 2 == 1 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
}

SizeReport size_report(const ParamStore& weights) {
  SizeReport report;
  for (const char* name : kSubtrees) {
    SubtreeSize s{name};
    s.params = weights.count(std::string(name) + ".");
    s.bytes = 4 * s.params;
    report.subtrees.push_back(s);
    report.total.params += s.params;
  }
  if (report.total.params != weights.count()) {
    throw InvalidConfig("some stored tensors belong to no known subtree");
  }
  report.total.bytes = 4 * report.total.params;
  return report;
}

}  // namespace dfmnet
