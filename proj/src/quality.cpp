// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "dfmnet/error.hpp"

namespace dfmnet {

namespace {

void require_single_channel(const Tensor& t, const char* what) {
  if (!t.defined() || t.rank() < 2 || t.dim(t.rank() - 2) * t.dim(t.rank() - 1) != t.numel()) {
    throw ShapeMismatch(std::string(what) + " must be a single-channel map, got " +
                        (t.defined() ? to_string(t.shape()) : "none"));
  }
}

}  // namespace

Tensor to_gray(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeMismatch("expected 3 x H x W image, got " + to_string(rgb.shape()));
  const std::int64_t plane = rgb.dim(1) * rgb.dim(2);
  Tensor out = Tensor::zeros({1, rgb.dim(1), rgb.dim(2)});
  auto src = rgb.data();
  auto dst = out.mutable_data();
  for (std::int64_t p = 0; p < plane; ++p) {
    dst[p] = 0.299f * src[p] + 0.587f * src[plane + p] + 0.114f * src[2 * plane + p];
  }
  return out;
}

Tensor edge_map(const Tensor& image) {
  require_single_channel(image, "edge_map input");
  const std::int64_t h = image.dim(image.rank() - 2), w = image.dim(image.rank() - 1);
  auto src = image.data();
  auto at = [&](std::int64_t i, std::int64_t j) {
    i = std::clamp<std::int64_t>(i, 0, h - 1);
    j = std::clamp<std::int64_t>(j, 0, w - 1);
    return static_cast<double>(src[i * w + j]);
  };
  std::vector<double> mag(static_cast<std::size_t>(h * w));
  double peak = 0.0;
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      const double gx = (at(i - 1, j + 1) + 2 * at(i, j + 1) + at(i + 1, j + 1)) -
                        (at(i - 1, j - 1) + 2 * at(i, j - 1) + at(i + 1, j - 1));
      const double gy = (at(i + 1, j - 1) + 2 * at(i + 1, j) + at(i + 1, j + 1)) -
                        (at(i - 1, j - 1) + 2 * at(i - 1, j) + at(i - 1, j + 1));
      const double m = std::sqrt(gx * gx + gy * gy);
      mag[static_cast<std::size_t>(i * w + j)] = m;
      peak = std::max(peak, m);
    }
  }
  Tensor out = Tensor::zeros(image.shape());
  auto dst = out.mutable_data();
  if (peak > 0.0) {
    for (std::size_t p = 0; p < mag.size(); ++p) dst[p] = static_cast<float>(std::min(1.0, mag[p] / peak));
  }
  return out;
}

double dice_alignment(const Tensor& a, const Tensor& b, double eps) {
  if (a.numel() != b.numel()) {
    throw ShapeMismatch("edge maps " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ in size");
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t p = 0; p < x.size(); ++p) {
    ab += static_cast<double>(x[p]) * y[p];
    aa += static_cast<double>(x[p]) * x[p];
    bb += static_cast<double>(y[p]) * y[p];
  }
  return 2.0 * ab / (aa + bb + eps);
}

std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  if (n < 2) throw EmptySet("a derangement needs at least two elements");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  // Sattolo: swapping only with strictly earlier positions yields a single
  // n-cycle, so no element stays in place.
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i)]);
  return perm;
}

DistributionSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw EmptySet("no values to summarize");
  DistributionSummary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  for (double v : values) {
    auto bin = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * kHistogramBins));
    s.histogram[static_cast<std::size_t>(std::min(bin, kHistogramBins - 1))] += 1;
  }
  return s;
}

double alpha_bar(const DfmNet& net, const Tensor& rgb, const Tensor& aux) {
  if (!net.config().use_dqw) throw InvalidConfig("model has no depth weighting to report");
  Shape rs{1}, as{1};
  rs.insert(rs.end(), rgb.shape().begin(), rgb.shape().end());
  as.insert(as.end(), aux.shape().begin(), aux.shape().end());
  if (aux.dim(0) != net.config().aux_channels()) {
    throw ModeMismatch("auxiliary input has " + std::to_string(aux.dim(0)) + " channels, model expects " +
                       std::to_string(net.config().aux_channels()));
  }
  const Tensor f_r1 = net.rgb_branch().step(0, rgb.reshape(rs), Phase::kInference);
  const Tensor f_d1 = net.depth_branch().step(0, aux.reshape(as), Phase::kInference);
  return net.dqw().forward(f_r1, f_d1, net.config().vba, Phase::kInference).mean(0);
}

QualityReport audit_set(const std::vector<QualityPair>& pairs, const AuditOptions& options) {
  if (pairs.empty()) throw EmptySet("quality audit needs at least one pair");
  std::vector<std::size_t> depth_of(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) depth_of[i] = i;
  if (options.shuffle) {
    Rng rng(options.seed);
    depth_of = derangement(pairs.size(), rng);
  }

  std::vector<Tensor> rgb_edges, depth_edges;
  for (const auto& p : pairs) {
    rgb_edges.push_back(edge_map(to_gray(p.rgb)));
    // Flow maps are reduced to luminance like RGB.
    depth_edges.push_back(edge_map(p.depth.dim(0) == 3 ? to_gray(p.depth) : p.depth));
  }

  QualityReport report;
  std::vector<double> dice, alphas;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::size_t d = depth_of[i];
    QualityEntry e;
    e.id = pairs[i].id;
    e.depth_id = pairs[d].id;
    e.c_dice = dice_alignment(rgb_edges[i], depth_edges[d]);
    if (options.alpha_model != nullptr) {
      e.alpha_bar = alpha_bar(*options.alpha_model, pairs[i].rgb, pairs[d].depth);
      alphas.push_back(*e.alpha_bar);
    }
    dice.push_back(e.c_dice);
    report.entries.push_back(std::move(e));
  }
  report.c_dice = summarize(dice);
  if (!alphas.empty()) report.alpha_bar = summarize(alphas);
  return report;
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw EmptySet("Welch test needs at least two samples per group");
  const DistributionSummary sa = summarize(a), sb = summarize(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = sa.std * sa.std / na, vb = sb.std * sb.std / nb;
  WelchResult r;
  const double diff = sa.mean - sb.mean;
  if (va + vb == 0.0) {
    r.t = diff > 0 ? std::numeric_limits<double>::infinity() : (diff < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
    r.df = na + nb - 2.0;
    r.p = diff > 0 ? 0.0 : (diff < 0 ? 1.0 : 0.5);
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

}  // namespace dfmnet
