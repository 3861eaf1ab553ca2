// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dfmnet/error.hpp"

namespace dfmnet {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Map {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::vector<double> v;

  double operator()(std::int64_t i, std::int64_t j) const { return v[static_cast<std::size_t>(i * w + j)]; }
};

Map as_map(const Tensor& t, const char* what) {
  if (!t.defined() || t.rank() < 2) throw ShapeMismatch(std::string(what) + " must be a 2-D map");
  Map m;
  m.h = t.dim(t.rank() - 2);
  m.w = t.dim(t.rank() - 1);
  if (m.h * m.w != t.numel()) throw ShapeMismatch(std::string(what) + " must be a single map, got " + to_string(t.shape()));
  m.v.assign(t.data().begin(), t.data().end());
  return m;
}

std::pair<Map, Map> as_pair(const Tensor& s, const Tensor& g) {
  Map ms = as_map(s, "prediction");
  Map mg = as_map(g, "ground truth");
  if (ms.h != mg.h || ms.w != mg.w) {
    throw ShapeMismatch("prediction " + to_string(s.shape()) + " and ground truth " + to_string(g.shape()) +
                        " differ in extents");
  }
  for (double& x : mg.v) x = x >= 0.5 ? 1.0 : 0.0;
  return {std::move(ms), std::move(mg)};
}

void check_levels(int levels) {
  if (levels < 2) throw InvalidConfig("threshold sweep needs at least 2 levels");
}

/// Confusion counts of S > t_k against G for every k.
struct Confusion {
  std::vector<double> tp, fp;  // indexed by k
  double positives = 0.0;
  double total = 0.0;
};

Confusion sweep(const Map& s, const Map& g, int levels) {
  // Pixel p is predicted positive at t_k iff k < kp, where kp counts the
  // thresholds strictly below S(p).
  const double scale = static_cast<double>(levels - 1);
  std::vector<double> fg_hist(static_cast<std::size_t>(levels) + 1, 0.0);
  std::vector<double> bg_hist(fg_hist.size(), 0.0);
  Confusion c;
  c.total = static_cast<double>(s.v.size());
  for (std::size_t p = 0; p < s.v.size(); ++p) {
    const double x = s.v[p];
    auto k = static_cast<std::int64_t>(std::ceil(x * scale));
    k = std::clamp<std::int64_t>(k, 0, levels);
    while (k > 0 && !(static_cast<double>(k - 1) / scale < x)) --k;
    while (k < levels && static_cast<double>(k) / scale < x) ++k;
    (g.v[p] > 0.5 ? fg_hist : bg_hist)[static_cast<std::size_t>(k)] += 1.0;
    c.positives += g.v[p];
  }
  // tp[k] = #fg pixels with kp > k, by suffix sums.
  c.tp.assign(static_cast<std::size_t>(levels), 0.0);
  c.fp.assign(static_cast<std::size_t>(levels), 0.0);
  double fg = 0.0, bg = 0.0;
  for (int k = levels - 1; k >= 0; --k) {
    fg += fg_hist[static_cast<std::size_t>(k) + 1];
    bg += bg_hist[static_cast<std::size_t>(k) + 1];
    c.tp[static_cast<std::size_t>(k)] = fg;
    c.fp[static_cast<std::size_t>(k)] = bg;
  }
  return c;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

// Object-aware similarity of the values of x where mask is set.
double object_score(const Map& x, const Map& mask) {
  double n = 0.0, sum = 0.0;
  for (std::size_t p = 0; p < x.v.size(); ++p) {
    if (mask.v[p] > 0.5) {
      n += 1.0;
      sum += x.v[p];
    }
  }
  if (n == 0.0) return 0.0;
  const double mu = sum / n;
  double ss = 0.0;
  for (std::size_t p = 0; p < x.v.size(); ++p) {
    if (mask.v[p] > 0.5) ss += (x.v[p] - mu) * (x.v[p] - mu);
  }
  const double sigma = std::sqrt(ss / (n - 1.0 + kEps));
  return 2.0 * mu / (mu * mu + 1.0 + sigma + kEps);
}

double s_object(const Map& s, const Map& g) {
  Map fg = s, bg = s, inv = g;
  for (std::size_t p = 0; p < s.v.size(); ++p) {
    fg.v[p] = g.v[p] > 0.5 ? s.v[p] : 0.0;
    bg.v[p] = g.v[p] > 0.5 ? 0.0 : 1.0 - s.v[p];
    inv.v[p] = 1.0 - g.v[p];
  }
  const double u = mean_of(g.v);
  return u * object_score(fg, g) + (1.0 - u) * object_score(bg, inv);
}

double region_ssim(const Map& s, const Map& g, std::int64_t i0, std::int64_t i1, std::int64_t j0, std::int64_t j1) {
  const double n = static_cast<double>((i1 - i0) * (j1 - j0));
  if (n <= 0.0) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::int64_t i = i0; i < i1; ++i)
    for (std::int64_t j = j0; j < j1; ++j) {
      mx += s(i, j);
      my += g(i, j);
    }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::int64_t i = i0; i < i1; ++i)
    for (std::int64_t j = j0; j < j1; ++j) {
      const double dx = s(i, j) - mx, dy = g(i, j) - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  sxx /= (n - 1.0 + kEps);
  syy /= (n - 1.0 + kEps);
  sxy /= (n - 1.0 + kEps);
  const double alpha = 4.0 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sxx + syy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

double s_region(const Map& s, const Map& g) {
  // Split at the ground-truth centroid (rounded, 1-based column/row count).
  double total = 0.0, cx = 0.0, cy = 0.0;
  for (std::int64_t i = 0; i < g.h; ++i)
    for (std::int64_t j = 0; j < g.w; ++j) {
      total += g(i, j);
      cx += g(i, j) * static_cast<double>(j + 1);
      cy += g(i, j) * static_cast<double>(i + 1);
    }
  const auto x = static_cast<std::int64_t>(std::lround(total == 0.0 ? g.w / 2.0 : cx / total));
  const auto y = static_cast<std::int64_t>(std::lround(total == 0.0 ? g.h / 2.0 : cy / total));
  const double area = static_cast<double>(g.h * g.w);
  const double w1 = static_cast<double>(x * y) / area;
  const double w2 = static_cast<double>((g.w - x) * y) / area;
  const double w3 = static_cast<double>(x * (g.h - y)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  return w1 * region_ssim(s, g, 0, y, 0, x) + w2 * region_ssim(s, g, 0, y, x, g.w) +
         w3 * region_ssim(s, g, y, g.h, 0, x) + w4 * region_ssim(s, g, y, g.h, x, g.w);
}

}  // namespace

double mae(const Tensor& s, const Tensor& g) {
  auto [ms, mg] = as_pair(s, g);
  double acc = 0.0;
  for (std::size_t p = 0; p < ms.v.size(); ++p) acc += std::abs(ms.v[p] - mg.v[p]);
  return acc / static_cast<double>(ms.v.size());
}

double f_measure_max(const Tensor& s, const Tensor& g, int levels) {
  check_levels(levels);
  auto [ms, mg] = as_pair(s, g);
  const Confusion c = sweep(ms, mg, levels);
  double best = 0.0;
  for (int k = 0; k < levels; ++k) {
    const double tp = c.tp[static_cast<std::size_t>(k)];
    const double predicted = tp + c.fp[static_cast<std::size_t>(k)];
    if (predicted == 0.0 || tp == 0.0) continue;
    const double precision = tp / predicted;
    const double recall = tp / c.positives;
    const double f = (1.0 + kFBetaSquared) * precision * recall / (kFBetaSquared * precision + recall);
    best = std::max(best, f);
  }
  return best;
}

double s_measure(const Tensor& s, const Tensor& g) {
  auto [ms, mg] = as_pair(s, g);
  const double y = mean_of(mg.v);
  double q;
  if (y == 0.0) {
    q = 1.0 - mean_of(ms.v);
  } else if (y == 1.0) {
    q = mean_of(ms.v);
  } else {
    q = 0.5 * s_object(ms, mg) + 0.5 * s_region(ms, mg);
  }
  return std::clamp(q, 0.0, 1.0);
}

double e_measure_max(const Tensor& s, const Tensor& g, int levels) {
  check_levels(levels);
  auto [ms, mg] = as_pair(s, g);
  const Confusion c = sweep(ms, mg, levels);
  const double n = c.total;
  const double mean_g = c.positives / n;
  double best = 0.0;
  for (int k = 0; k < levels; ++k) {
    const double tp = c.tp[static_cast<std::size_t>(k)];
    const double fp = c.fp[static_cast<std::size_t>(k)];
    const double fn = c.positives - tp;
    const double tn = n - c.positives - fp;
    double sum;
    if (c.positives == 0.0) {
      sum = tn;  // alignment matrix is 1 - FM
    } else if (c.positives == n) {
      sum = tp;  // alignment matrix is FM
    } else {
      // The bias-removed maps take two values each, so the enhanced
      // alignment matrix has four distinct entries.
      const double mean_fm = (tp + fp) / n;
      auto enhanced = [&](double fm, double gt) {
        const double a = fm - mean_fm, b = gt - mean_g;
        const double align = 2.0 * a * b / (a * a + b * b + kEps);
        return (align + 1.0) * (align + 1.0) / 4.0;
      };
      sum = tp * enhanced(1, 1) + fp * enhanced(1, 0) + fn * enhanced(0, 1) + tn * enhanced(0, 0);
    }
    best = std::max(best, sum / (n - 1.0 + kEps));
  }
  return std::clamp(best, 0.0, 1.0);
}

EvalResult evaluate(const Tensor& s, const Tensor& g) {
  return EvalResult{s_measure(s, g), f_measure_max(s, g), e_measure_max(s, g), mae(s, g)};
}

EvalResult mean_result(const std::vector<EvalResult>& results) {
  if (results.empty()) throw EmptySet("no results to average");
  EvalResult m;
  for (const auto& r : results) {
    m.s_alpha += r.s_alpha;
    m.f_beta_max += r.f_beta_max;
    m.e_xi_max += r.e_xi_max;
    m.mae += r.mae;
  }
  const double n = static_cast<double>(results.size());
  m.s_alpha /= n;
  m.f_beta_max /= n;
  m.e_xi_max /= n;
  m.mae /= n;
  return m;
}

}  // namespace dfmnet
