// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Core>
#include <algorithm>

#include "dfmnet/error.hpp"
#include "dfmnet/ops.hpp"

namespace dfmnet {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeometry {
  std::int64_t n, cin, h, w;
  std::int64_t cout, k;
  std::int64_t hout, wout;
  std::int64_t cin_g, cout_g;
  int stride, dilation, pad, groups;

  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
  bool depthwise() const { return groups == cin && cout == cin && groups > 1; }
};

ConvGeometry make_geometry(const Tensor& x, const Tensor& weight, const Conv2dOptions& opt) {
  if (opt.stride <= 0 || opt.dilation <= 0) throw InvalidConfig("conv2d stride and dilation must be positive");
  if (opt.pad < 0 || opt.groups <= 0) throw InvalidConfig("conv2d pad must be >= 0 and groups > 0");
  if (x.rank() != 4 || weight.rank() != 4) {
    throw ShapeMismatch("conv2d expects NCHW input and OIHW weights, got " + to_string(x.shape()) + " and " +
                        to_string(weight.shape()));
  }
  ConvGeometry g{};
  g.n = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = weight.dim(0);
  g.k = weight.dim(2);
  g.stride = opt.stride;
  g.dilation = opt.dilation;
  g.pad = opt.pad;
  g.groups = opt.groups;
  if (weight.dim(3) != g.k) throw ShapeMismatch("conv2d expects square kernels");
  if (g.cin % g.groups != 0 || g.cout % g.groups != 0) {
    throw ShapeMismatch("conv2d channels not divisible by groups");
  }
  g.cin_g = g.cin / g.groups;
  g.cout_g = g.cout / g.groups;
  if (weight.dim(1) != g.cin_g) {
    throw ShapeMismatch("conv2d weight " + to_string(weight.shape()) + " incompatible with input " +
                        to_string(x.shape()) + " at groups=" + std::to_string(g.groups));
  }
  const std::int64_t eff = static_cast<std::int64_t>(opt.dilation) * (g.k - 1) + 1;
  if (g.h + 2 * opt.pad < eff || g.w + 2 * opt.pad < eff) {
    throw ShapeMismatch("conv2d padded input " + to_string(x.shape()) + " smaller than kernel extent");
  }
  g.hout = conv_output_extent(g.h, g.k, opt);
  g.wout = conv_output_extent(g.w, g.k, opt);
  return g;
}

// col is (cin_g*k*k) x (hout*wout), row index (c*k + ky)*k + kx.
void im2col(const float* x, const ConvGeometry& g, float* col) {
  const std::int64_t plane = g.hout * g.wout;
  for (std::int64_t c = 0; c < g.cin_g; ++c) {
    const float* xc = x + c * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        float* row = col + ((c * g.k + ky) * g.k + kx) * plane;
        for (std::int64_t oy = 0; oy < g.hout; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky * g.dilation;
          float* dst = row + oy * g.wout;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wout, 0.0f);
            continue;
          }
          const float* src = xc + iy * g.w;
          for (std::int64_t ox = 0; ox < g.wout; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx * g.dilation;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, const ConvGeometry& g, float* dx) {
  const std::int64_t plane = g.hout * g.wout;
  for (std::int64_t c = 0; c < g.cin_g; ++c) {
    float* dxc = dx + c * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const float* row = col + ((c * g.k + ky) * g.k + kx) * plane;
        for (std::int64_t oy = 0; oy < g.hout; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky * g.dilation;
          if (iy < 0 || iy >= g.h) continue;
          const float* src = row + oy * g.wout;
          float* dst = dxc + iy * g.w;
          for (std::int64_t ox = 0; ox < g.wout; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx * g.dilation;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Range of output columns whose input column ox*stride - pad + off lies in [0, w).
void valid_range(std::int64_t off, std::int64_t stride, std::int64_t in, std::int64_t out, std::int64_t& lo,
                 std::int64_t& hi) {
  // ox*stride + off >= 0  and  ox*stride + off <= in - 1
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  const std::int64_t top = in - 1 - off;
  hi = top < 0 ? 0 : std::min<std::int64_t>(out, top / stride + 1);
  if (hi < lo) hi = lo;
}

void depthwise_forward(const float* x, const float* w, float* y, const ConvGeometry& g) {
  // Row-outer order keeps each output row in L1 across the k*k taps; every
  // element still sums its taps in (ky, kx) order.
  std::vector<std::int64_t> lo(static_cast<std::size_t>(g.k)), hi(static_cast<std::size_t>(g.k));
  for (std::int64_t kx = 0; kx < g.k; ++kx) {
    valid_range(kx * g.dilation - g.pad, g.stride, g.w, g.wout, lo[kx], hi[kx]);
  }
  for (std::int64_t oy = 0; oy < g.hout; ++oy) {
    float* dst = y + oy * g.wout;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      const std::int64_t iy = oy * g.stride - g.pad + ky * g.dilation;
      if (iy < 0 || iy >= g.h) continue;
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const float wv = w[ky * g.k + kx];
        const float* src = x + iy * g.w + kx * g.dilation - g.pad;
        if (g.stride == 1) {
          for (std::int64_t ox = lo[kx]; ox < hi[kx]; ++ox) dst[ox] += wv * src[ox];
        } else {
          for (std::int64_t ox = lo[kx]; ox < hi[kx]; ++ox) dst[ox] += wv * src[ox * g.stride];
        }
      }
    }
  }
}

void depthwise_backward(const float* x, const float* w, const float* gy, float* gx, float* gw,
                        const ConvGeometry& g) {
  for (std::int64_t ky = 0; ky < g.k; ++ky) {
    for (std::int64_t kx = 0; kx < g.k; ++kx) {
      const float wv = w[ky * g.k + kx];
      const std::int64_t offx = kx * g.dilation - g.pad;
      std::int64_t lo, hi;
      valid_range(offx, g.stride, g.w, g.wout, lo, hi);
      float acc = 0.0f;
      for (std::int64_t oy = 0; oy < g.hout; ++oy) {
        const std::int64_t iy = oy * g.stride - g.pad + ky * g.dilation;
        if (iy < 0 || iy >= g.h) continue;
        const float* src = x + iy * g.w + offx;
        const float* go = gy + oy * g.wout;
        float* dst = gx ? gx + iy * g.w + offx : nullptr;
        for (std::int64_t ox = lo; ox < hi; ++ox) {
          const std::int64_t ix = ox * g.stride;
          acc += go[ox] * src[ix];
          if (dst) dst[ix] += wv * go[ox];
        }
      }
      if (gw) gw[ky * g.k + kx] += acc;
    }
  }
}


// Small output planes make the per-sample product a thin matrix that is
// bound by streaming the weights; gathering the batch into one wide product
// reuses each weight tile across all samples.
constexpr std::int64_t kFoldPlaneLimit = 1024;

bool folds_batch(const ConvGeometry& g, std::int64_t plane_out) { return g.n > 1 && plane_out <= kFoldPlaneLimit; }

void conv_folded(const float* xs, const float* ws, float* ys, const ConvGeometry& g, std::vector<float>& col) {
  const std::int64_t plane_in = g.h * g.w;
  const std::int64_t plane_out = g.hout * g.wout;
  const std::int64_t kk = g.cin_g * g.k * g.k;
  const std::int64_t wide = g.n * plane_out;
  std::vector<float> gathered(static_cast<std::size_t>(kk * wide));
  std::vector<float> result(static_cast<std::size_t>(g.cout_g * wide));
  for (int grp = 0; grp < g.groups; ++grp) {
    for (std::int64_t n = 0; n < g.n; ++n) {
      const float* xg = xs + (n * g.cin + grp * g.cin_g) * plane_in;
      const float* src = xg;
      if (!g.pointwise()) {
        im2col(xg, g, col.data());
        src = col.data();
      }
      for (std::int64_t r = 0; r < kk; ++r) {
        std::copy_n(src + r * plane_out, plane_out, gathered.data() + r * wide + n * plane_out);
      }
    }
    ConstMapMat wm(ws + grp * g.cout_g * kk, g.cout_g, kk);
    ConstMapMat cm(gathered.data(), kk, wide);
    MapMat ym(result.data(), g.cout_g, wide);
    ym.noalias() = wm * cm;
    for (std::int64_t n = 0; n < g.n; ++n) {
      for (std::int64_t c = 0; c < g.cout_g; ++c) {
        std::copy_n(result.data() + c * wide + n * plane_out, plane_out,
                    ys + (n * g.cout + grp * g.cout_g + c) * plane_out);
      }
    }
  }
}

}  // namespace

std::int64_t conv_output_extent(std::int64_t in, std::int64_t kernel, const Conv2dOptions& opt) {
  return (in + 2 * opt.pad - static_cast<std::int64_t>(opt.dilation) * (kernel - 1) - 1) / opt.stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2dOptions& opt) {
  const ConvGeometry g = make_geometry(x, weight, opt);
  if (bias.defined() && (bias.numel() != g.cout)) {
    throw ShapeMismatch("conv2d bias " + to_string(bias.shape()) + " for " + std::to_string(g.cout) + " outputs");
  }
  // Depthwise accumulates into its output; the products overwrite theirs.
  Tensor out = g.depthwise() ? Tensor::zeros({g.n, g.cout, g.hout, g.wout})
                             : Tensor::uninitialized({g.n, g.cout, g.hout, g.wout});
  const float* xs = x.data().data();
  const float* ws = weight.data().data();
  float* ys = out.mutable_data().data();
  const std::int64_t plane_in = g.h * g.w;
  const std::int64_t plane_out = g.hout * g.wout;
  const std::int64_t kk = g.cin_g * g.k * g.k;

  if (g.depthwise()) {
    for (std::int64_t n = 0; n < g.n; ++n) {
      for (std::int64_t c = 0; c < g.cin; ++c) {
        depthwise_forward(xs + (n * g.cin + c) * plane_in, ws + c * g.k * g.k, ys + (n * g.cout + c) * plane_out, g);
      }
    }
  } else {
    std::vector<float> col(g.pointwise() ? 0 : static_cast<std::size_t>(kk * plane_out));
    if (folds_batch(g, plane_out)) {
      conv_folded(xs, ws, ys, g, col);
    } else {
      for (std::int64_t n = 0; n < g.n; ++n) {
        for (int grp = 0; grp < g.groups; ++grp) {
          const float* xg = xs + (n * g.cin + grp * g.cin_g) * plane_in;
          const float* src = xg;
          if (!g.pointwise()) {
            im2col(xg, g, col.data());
            src = col.data();
          }
          ConstMapMat wm(ws + grp * g.cout_g * kk, g.cout_g, kk);
          ConstMapMat cm(src, kk, plane_out);
          MapMat ym(ys + (n * g.cout + grp * g.cout_g) * plane_out, g.cout_g, plane_out);
          ym.noalias() = wm * cm;
        }
      }
    }
  }
  if (bias.defined()) {
    auto b = bias.data();
    for (std::int64_t n = 0; n < g.n; ++n) {
      for (std::int64_t c = 0; c < g.cout; ++c) {
        float* dst = ys + (n * g.cout + c) * plane_out;
        for (std::int64_t i = 0; i < plane_out; ++i) dst[i] += b[static_cast<std::size_t>(c)];
      }
    }
  }

  Tape::record(out, {&x, &weight, &bias}, [x, weight, bias, out, g] {
    const float* xs = x.data().data();
    const float* ws = weight.data().data();
    const float* gys = out.grad().data();
    float* gxs = x.requires_grad() ? grad_buffer(x).data() : nullptr;
    float* gws = weight.requires_grad() ? grad_buffer(weight).data() : nullptr;
    const std::int64_t plane_in = g.h * g.w;
    const std::int64_t plane_out = g.hout * g.wout;
    const std::int64_t kk = g.cin_g * g.k * g.k;

    if (bias.defined() && bias.requires_grad()) {
      auto gb = grad_buffer(bias);
      for (std::int64_t n = 0; n < g.n; ++n) {
        for (std::int64_t c = 0; c < g.cout; ++c) {
          const float* src = gys + (n * g.cout + c) * plane_out;
          double acc = 0.0;
          for (std::int64_t i = 0; i < plane_out; ++i) acc += src[i];
          gb[static_cast<std::size_t>(c)] += static_cast<float>(acc);
        }
      }
    }
    if (gxs == nullptr && gws == nullptr) return;

    if (g.depthwise()) {
      for (std::int64_t n = 0; n < g.n; ++n) {
        for (std::int64_t c = 0; c < g.cin; ++c) {
          depthwise_backward(xs + (n * g.cin + c) * plane_in, ws + c * g.k * g.k, gys + (n * g.cout + c) * plane_out,
                             gxs ? gxs + (n * g.cin + c) * plane_in : nullptr, gws ? gws + c * g.k * g.k : nullptr,
                             g);
        }
      }
      return;
    }

    std::vector<float> col(g.pointwise() ? 0 : static_cast<std::size_t>(kk * plane_out));
    std::vector<float> dcol(static_cast<std::size_t>(kk * plane_out));
    for (std::int64_t n = 0; n < g.n; ++n) {
      for (int grp = 0; grp < g.groups; ++grp) {
        const float* xg = xs + (n * g.cin + grp * g.cin_g) * plane_in;
        ConstMapMat wm(ws + grp * g.cout_g * kk, g.cout_g, kk);
        ConstMapMat gym(gys + (n * g.cout + grp * g.cout_g) * plane_out, g.cout_g, plane_out);
        if (gws) {
          const float* src = xg;
          if (!g.pointwise()) {
            im2col(xg, g, col.data());
            src = col.data();
          }
          ConstMapMat cm(src, kk, plane_out);
          MapMat gwm(gws + grp * g.cout_g * kk, g.cout_g, kk);
          gwm.noalias() += gym * cm.transpose();
        }
        if (gxs) {
          float* gxg = gxs + (n * g.cin + grp * g.cin_g) * plane_in;
          if (g.pointwise()) {
            MapMat gxm(gxg, kk, plane_out);
            gxm.noalias() += wm.transpose() * gym;
          } else {
            MapMat dcm(dcol.data(), kk, plane_out);
            dcm.noalias() = wm.transpose() * gym;
            col2im(dcol.data(), g, gxg);
          }
        }
      }
    }
  });
  return out;
}

}  // namespace dfmnet
