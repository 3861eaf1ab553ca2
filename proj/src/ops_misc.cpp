// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>

#include "dfmnet/error.hpp"
#include "dfmnet/ops.hpp"

namespace dfmnet {

namespace {

void require_nchw(const Tensor& x, const char* op) {
  if (!x.defined() || x.rank() != 4) {
    throw ShapeMismatch(std::string(op) + " expects an NCHW tensor, got " +
                        (x.defined() ? to_string(x.shape()) : std::string("undefined")));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor running_mean,
                  Tensor running_var, bool training, float momentum, float eps) {
  require_nchw(x, "batch_norm");
  const std::int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  for (const Tensor* t : {&gamma, &beta, static_cast<const Tensor*>(&running_mean), static_cast<const Tensor*>(&running_var)}) {
    if (t->numel() != c) throw ShapeMismatch("batch_norm parameter size does not match " + to_string(x.shape()));
  }
  const std::int64_t count = n * plane;
  std::vector<float> mean_c(static_cast<std::size_t>(c));
  std::vector<float> invstd_c(static_cast<std::size_t>(c));
  auto xs = x.data();
  if (training) {
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double s = 0.0, s2 = 0.0;
      for (std::int64_t b = 0; b < n; ++b) {
        const float* p = xs.data() + (b * c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(count);
      for (std::int64_t b = 0; b < n; ++b) {
        const float* p = xs.data() + (b * c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          s2 += d * d;
        }
      }
      const double var = s2 / static_cast<double>(count);
      mean_c[ch] = static_cast<float>(mu);
      invstd_c[ch] = static_cast<float>(1.0 / std::sqrt(var + eps));
      const double unbiased = count > 1 ? s2 / static_cast<double>(count - 1) : var;
      rm[ch] = static_cast<float>((1.0 - momentum) * rm[ch] + momentum * mu);
      rv[ch] = static_cast<float>((1.0 - momentum) * rv[ch] + momentum * unbiased);
    }
  } else {
    auto rm = running_mean.data();
    auto rv = running_var.data();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      if (rv[ch] < 0.0f) throw NumericalError("negative running variance");
      mean_c[ch] = rm[ch];
      invstd_c[ch] = 1.0f / std::sqrt(rv[ch] + eps);
    }
  }

  Tensor out = Tensor::uninitialized(x.shape());
  auto ys = out.mutable_data();
  auto gs = gamma.data();
  auto bs = beta.data();
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const float scale = gs[ch] * invstd_c[ch];
      const float shift = bs[ch] - mean_c[ch] * scale;
      const float* p = xs.data() + (b * c + ch) * plane;
      float* q = ys.data() + (b * c + ch) * plane;
      for (std::int64_t i = 0; i < plane; ++i) q[i] = p[i] * scale + shift;
    }
  }

  Tape::record(out, {&x, &gamma, &beta}, [x, gamma, beta, out, mean_c, invstd_c, training, n, c, plane, count] {
    auto xs = x.data();
    auto go = out.grad();
    auto gs = gamma.data();
    std::vector<double> sum_g(static_cast<std::size_t>(c), 0.0), sum_gx(static_cast<std::size_t>(c), 0.0);
    for (std::int64_t b = 0; b < n; ++b) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const float* p = xs.data() + (b * c + ch) * plane;
        const float* g = go.data() + (b * c + ch) * plane;
        double a = 0.0, ax = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) {
          a += g[i];
          ax += g[i] * (p[i] - mean_c[ch]) * invstd_c[ch];
        }
        sum_g[ch] += a;
        sum_gx[ch] += ax;
      }
    }
    if (gamma.requires_grad()) {
      auto gg = grad_buffer(gamma);
      for (std::int64_t ch = 0; ch < c; ++ch) gg[ch] += static_cast<float>(sum_gx[ch]);
    }
    if (beta.requires_grad()) {
      auto gb = grad_buffer(beta);
      for (std::int64_t ch = 0; ch < c; ++ch) gb[ch] += static_cast<float>(sum_g[ch]);
    }
    if (!x.requires_grad()) return;
    auto gx = grad_buffer(x);
    const double m = static_cast<double>(count);
    for (std::int64_t b = 0; b < n; ++b) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const float* p = xs.data() + (b * c + ch) * plane;
        const float* g = go.data() + (b * c + ch) * plane;
        float* q = gx.data() + (b * c + ch) * plane;
        const double k = static_cast<double>(gs[ch]) * invstd_c[ch];
        if (training) {
          const double mg = sum_g[ch] / m;
          const double mgx = sum_gx[ch] / m;
          for (std::int64_t i = 0; i < plane; ++i) {
            const double xhat = (p[i] - mean_c[ch]) * static_cast<double>(invstd_c[ch]);
            q[i] += static_cast<float>(k * (g[i] - mg - xhat * mgx));
          }
        } else {
          for (std::int64_t i = 0; i < plane; ++i) q[i] += static_cast<float>(k * g[i]);
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

Tensor pool(const Tensor& x, PoolKind kind) {
  require_nchw(x, "pool");
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto xs = x.data();
  if (kind == PoolKind::kGlobalAvg) {
    const std::int64_t plane = h * w;
    Tensor out = Tensor::zeros({n, c, 1, 1});
    auto ys = out.mutable_data();
    for (std::int64_t i = 0; i < n * c; ++i) {
      double acc = 0.0;
      const float* p = xs.data() + i * plane;
      for (std::int64_t j = 0; j < plane; ++j) acc += p[j];
      ys[i] = static_cast<float>(acc / static_cast<double>(plane));
    }
    Tape::record(out, {&x}, [x, out, plane] {
      auto gx = grad_buffer(x);
      auto go = out.grad();
      const float inv = 1.0f / static_cast<float>(plane);
      for (std::size_t i = 0; i < go.size(); ++i) {
        float* q = gx.data() + i * plane;
        const float g = go[i] * inv;
        for (std::int64_t j = 0; j < plane; ++j) q[j] += g;
      }
    });
    return out;
  }

  if (h < 2 || w < 2) throw ShapeMismatch("max2x2_s2 pooling needs H,W >= 2, got " + to_string(x.shape()));
  const std::int64_t ho = h / 2, wo = w / 2;
  Tensor out = Tensor::uninitialized({n, c, ho, wo});
  auto ys = out.mutable_data();
  std::vector<std::int32_t> argmax(static_cast<std::size_t>(n * c * ho * wo));
  for (std::int64_t i = 0; i < n * c; ++i) {
    const float* p = xs.data() + i * h * w;
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        std::int64_t best = (2 * oy) * w + 2 * ox;
        for (std::int64_t dy = 0; dy < 2; ++dy) {
          for (std::int64_t dx = 0; dx < 2; ++dx) {
            const std::int64_t at = (2 * oy + dy) * w + 2 * ox + dx;
            if (p[at] > p[best]) best = at;
          }
        }
        const std::int64_t o = (i * ho + oy) * wo + ox;
        ys[o] = p[best];
        argmax[o] = static_cast<std::int32_t>(best);
      }
    }
  }
  Tape::record(out, {&x}, [x, out, argmax = std::move(argmax), h, w, ho, wo] {
    auto gx = grad_buffer(x);
    auto go = out.grad();
    const std::int64_t per = ho * wo;
    for (std::size_t o = 0; o < go.size(); ++o) {
      const std::int64_t plane_idx = static_cast<std::int64_t>(o) / per;
      gx[plane_idx * h * w + argmax[o]] += go[o];
    }
  });
  return out;
}

Tensor adaptive_avg_pool(const Tensor& x, int bins) {
  require_nchw(x, "adaptive_avg_pool");
  if (bins <= 0) throw InvalidConfig("adaptive_avg_pool bins must be positive");
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto start = [](std::int64_t i, std::int64_t in, std::int64_t out) { return (i * in) / out; };
  auto stop = [](std::int64_t i, std::int64_t in, std::int64_t out) { return ((i + 1) * in + out - 1) / out; };
  Tensor out = Tensor::zeros({n, c, bins, bins});
  auto xs = x.data();
  auto ys = out.mutable_data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    const float* src = xs.data() + p * h * w;
    for (std::int64_t by = 0; by < bins; ++by) {
      const std::int64_t y0 = start(by, h, bins), y1 = stop(by, h, bins);
      for (std::int64_t bx = 0; bx < bins; ++bx) {
        const std::int64_t x0 = start(bx, w, bins), x1 = stop(bx, w, bins);
        double acc = 0.0;
        for (std::int64_t yy = y0; yy < y1; ++yy)
          for (std::int64_t xx = x0; xx < x1; ++xx) acc += src[yy * w + xx];
        ys[(p * bins + by) * bins + bx] = static_cast<float>(acc / static_cast<double>((y1 - y0) * (x1 - x0)));
      }
    }
  }
  Tape::record(out, {&x}, [x, out, n, c, h, w, bins, start, stop] {
    auto gx = grad_buffer(x);
    auto go = out.grad();
    for (std::int64_t p = 0; p < n * c; ++p) {
      float* dst = gx.data() + p * h * w;
      for (std::int64_t by = 0; by < bins; ++by) {
        const std::int64_t y0 = start(by, h, bins), y1 = stop(by, h, bins);
        for (std::int64_t bx = 0; bx < bins; ++bx) {
          const std::int64_t x0 = start(bx, w, bins), x1 = stop(bx, w, bins);
          const float g = go[(p * bins + by) * bins + bx] / static_cast<float>((y1 - y0) * (x1 - x0));
          for (std::int64_t yy = y0; yy < y1; ++yy)
            for (std::int64_t xx = x0; xx < x1; ++xx) dst[yy * w + xx] += g;
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Bilinear resampling
// ---------------------------------------------------------------------------

namespace {

struct Taps {
  std::vector<std::int64_t> lo, hi;
  std::vector<float> frac;
};

Taps make_taps(std::int64_t in, std::int64_t out, double scale) {
  Taps t;
  t.lo.resize(static_cast<std::size_t>(out));
  t.hi.resize(static_cast<std::size_t>(out));
  t.frac.resize(static_cast<std::size_t>(out));
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::int64_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    t.lo[o] = lo;
    t.hi[o] = lo < in - 1 ? lo + 1 : lo;
    t.frac[o] = static_cast<float>(src - static_cast<double>(lo));
  }
  return t;
}

Tensor resize_with_scale(const Tensor& x, std::int64_t oh, std::int64_t ow, double scale_y, double scale_x) {
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Taps ty = make_taps(h, oh, scale_y);
  const Taps tx = make_taps(w, ow, scale_x);
  Tensor out = Tensor::uninitialized({n, c, oh, ow});
  auto xs = x.data();
  auto ys = out.mutable_data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    const float* src = xs.data() + p * h * w;
    float* dst = ys.data() + p * oh * ow;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      const float* r0 = src + ty.lo[oy] * w;
      const float* r1 = src + ty.hi[oy] * w;
      const float fy = ty.frac[oy];
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const std::int64_t x0 = tx.lo[ox], x1 = tx.hi[ox];
        const float fx = tx.frac[ox];
        const float top = r0[x0] + fx * (r0[x1] - r0[x0]);
        const float bot = r1[x0] + fx * (r1[x1] - r1[x0]);
        dst[oy * ow + ox] = top + fy * (bot - top);
      }
    }
  }
  Tape::record(out, {&x}, [x, out, ty, tx, n, c, h, w, oh, ow] {
    auto gx = grad_buffer(x);
    auto go = out.grad();
    for (std::int64_t p = 0; p < n * c; ++p) {
      float* dst = gx.data() + p * h * w;
      const float* g = go.data() + p * oh * ow;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        const float fy = ty.frac[oy];
        float* r0 = dst + ty.lo[oy] * w;
        float* r1 = dst + ty.hi[oy] * w;
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          const float fx = tx.frac[ox];
          const float v = g[oy * ow + ox];
          r0[tx.lo[ox]] += v * (1.0f - fy) * (1.0f - fx);
          r0[tx.hi[ox]] += v * (1.0f - fy) * fx;
          r1[tx.lo[ox]] += v * fy * (1.0f - fx);
          r1[tx.hi[ox]] += v * fy * fx;
        }
      }
    }
  });
  return out;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
  require_nchw(x, "resize_bilinear");
  if (out_h <= 0 || out_w <= 0) throw ShapeMismatch("resize_bilinear target extents must be positive");
  return resize_with_scale(x, out_h, out_w, static_cast<double>(x.dim(2)) / static_cast<double>(out_h),
                           static_cast<double>(x.dim(3)) / static_cast<double>(out_w));
}

Tensor resample(const Tensor& x, Ratio factor) {
  require_nchw(x, "resample");
  const bool supported = (factor.den == 1 && (factor.num == 1 || factor.num == 2 || factor.num == 4 ||
                                               factor.num == 8 || factor.num == 16)) ||
                         (factor.num == 1 && (factor.den == 2 || factor.den == 4 || factor.den == 8));
  if (!supported) {
    throw InvalidConfig("unsupported resample factor " + std::to_string(factor.num) + "/" + std::to_string(factor.den));
  }
  if (factor.num == 1 && factor.den == 1) return x;
  const std::int64_t h = x.dim(2), w = x.dim(3);
  if ((h * factor.num) % factor.den != 0 || (w * factor.num) % factor.den != 0) {
    throw ShapeMismatch("resample by " + std::to_string(factor.num) + "/" + std::to_string(factor.den) +
                        " of " + to_string(x.shape()) + " gives non-integral extents");
  }
  const double scale = static_cast<double>(factor.den) / static_cast<double>(factor.num);
  return resize_with_scale(x, h * factor.num / factor.den, w * factor.num / factor.den, scale, scale);
}

// ---------------------------------------------------------------------------
// Channel plumbing
// ---------------------------------------------------------------------------

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
  for (const auto& p : parts) require_nchw(p, "concat_channels");
  const std::int64_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  std::int64_t c = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w) {
      throw ShapeMismatch("concat_channels: " + to_string(p.shape()) + " vs " + to_string(parts[0].shape()));
    }
    c += p.dim(1);
  }
  const std::int64_t plane = h * w;
  Tensor out = Tensor::uninitialized({n, c, h, w});
  auto ys = out.mutable_data();
  for (std::int64_t b = 0; b < n; ++b) {
    std::int64_t offset = 0;
    for (const auto& p : parts) {
      const std::int64_t block = p.dim(1) * plane;
      std::copy_n(p.data().data() + b * block, block, ys.data() + (b * c) * plane + offset);
      offset += block;
    }
  }
  // One node per part; they share the output and replay adjacently.
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t block = p.dim(1) * plane;
    const Tensor part = p;
    Tape::record(out, {&part}, [part, out, offset, block, n, c, plane] {
      auto g = grad_buffer(part);
      auto go = out.grad();
      for (std::int64_t b = 0; b < n; ++b) {
        const float* src = go.data() + b * c * plane + offset;
        float* dst = g.data() + b * block;
        for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    });
    offset += block;
  }
  return out;
}

Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t end) {
  require_nchw(x, "slice_channels");
  const std::int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (begin < 0 || end > c || begin >= end) throw ShapeMismatch("slice_channels range out of bounds");
  const std::int64_t cs = end - begin;
  Tensor out = Tensor::uninitialized({n, cs, x.dim(2), x.dim(3)});
  auto ys = out.mutable_data();
  for (std::int64_t b = 0; b < n; ++b) {
    std::copy_n(x.data().data() + (b * c + begin) * plane, cs * plane, ys.data() + b * cs * plane);
  }
  Tape::record(out, {&x}, [x, out, n, c, cs, begin, plane] {
    auto g = grad_buffer(x);
    auto go = out.grad();
    for (std::int64_t b = 0; b < n; ++b) {
      const float* src = go.data() + b * cs * plane;
      float* dst = g.data() + (b * c + begin) * plane;
      for (std::int64_t i = 0; i < cs * plane; ++i) dst[i] += src[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

Tensor binary_cross_entropy(const Tensor& pred, const Tensor& target, float eps) {
  if (pred.shape() != target.shape()) {
    throw ShapeMismatch("binary_cross_entropy: " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  }
  auto p = pred.data();
  auto t = target.data();
  const double lo = eps, hi = 1.0 - static_cast<double>(eps);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), lo, hi);
    acc -= t[i] * std::log(q) + (1.0 - t[i]) * std::log(1.0 - q);
  }
  const double n = static_cast<double>(p.size());
  const double loss = acc / n;
  if (!std::isfinite(loss)) throw NumericalError("non-finite binary cross-entropy");
  Tensor out = Tensor::scalar(static_cast<float>(loss));
  Tape::record(out, {&pred}, [pred, target, out, lo, hi, n] {
    auto g = grad_buffer(pred);
    auto p = pred.data();
    auto t = target.data();
    const double go = out.grad()[0] / n;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double q = p[i];
      if (q <= lo || q >= hi) continue;
      g[i] += static_cast<float>(go * (-t[i] / q + (1.0 - t[i]) / (1.0 - q)));
    }
  });
  return out;
}

}  // namespace dfmnet
