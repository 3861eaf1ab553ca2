// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dfmnet/tensor.hpp"

namespace dfmnet {

// ---------------------------------------------------------------------------
// Elementwise arithmetic with numpy-style (right-aligned) broadcasting: an
// operand is replicated along axes it lacks or where its extent is 1.
// ---------------------------------------------------------------------------

enum class Elementwise { kAdd, kSub, kMul, kDiv, kRelu, kSigmoid };

/// Throws ShapeMismatch if the operands cannot be broadcast together and
/// NumericalError if any output is NaN or infinite.
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b = Tensor());

Shape broadcast_shape(const Shape& a, const Shape& b);

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kAdd, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kSub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kMul, a, b); }
inline Tensor div(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kDiv, a, b); }
inline Tensor relu(const Tensor& a) { return elementwise(Elementwise::kRelu, a); }
inline Tensor sigmoid(const Tensor& a) { return elementwise(Elementwise::kSigmoid, a); }

Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);

/// Reductions to a single-element tensor of shape [1].
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---------------------------------------------------------------------------
// Convolution (NCHW input, OIHW weights).
// ---------------------------------------------------------------------------

struct Conv2dOptions {
  int stride = 1;
  int dilation = 1;
  int pad = 0;
  int groups = 1;
};

std::int64_t conv_output_extent(std::int64_t in, std::int64_t kernel, const Conv2dOptions& opt);

/// `bias` may be undefined. groups == in_channels gives a depthwise conv.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2dOptions& opt);
inline Tensor conv2d(const Tensor& x, const Tensor& weight, const Conv2dOptions& opt) {
  return conv2d(x, weight, Tensor(), opt);
}

// ---------------------------------------------------------------------------
// Normalization.
// ---------------------------------------------------------------------------

/// Per-channel batch normalization. In training mode the batch statistics
/// normalize the input and the running buffers are updated in place
/// (running = (1 - momentum) * running + momentum * batch, unbiased variance);
/// otherwise the running statistics are used.
inline constexpr float kBatchNormEps = 1e-5f;
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor running_mean,
                  Tensor running_var, bool training, float momentum = 0.1f, float eps = kBatchNormEps);

// ---------------------------------------------------------------------------
// Pooling.
// ---------------------------------------------------------------------------

enum class PoolKind { kMax2x2Stride2, kGlobalAvg };

Tensor pool(const Tensor& x, PoolKind kind);
inline Tensor max_pool2x2(const Tensor& x) { return pool(x, PoolKind::kMax2x2Stride2); }
inline Tensor global_avg_pool(const Tensor& x) { return pool(x, PoolKind::kGlobalAvg); }

/// Average pooling onto a bins x bins grid; cell i spans
/// [floor(i*H/bins), ceil((i+1)*H/bins)).
Tensor adaptive_avg_pool(const Tensor& x, int bins);

// ---------------------------------------------------------------------------
// Bilinear resampling with half-pixel centres (align_corners = false):
//   src = (dst + 0.5) * (in / out) - 0.5, clamped below at 0,
//   v = lerp(lerp(a, b, fx), lerp(c, d, fx), fy)   with lerp(p, q, t) = p + t * (q - p).
// The lerp form reproduces constant maps exactly.
// ---------------------------------------------------------------------------

struct Ratio {
  int num = 1;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
};

/// Spatial rescale by a power-of-two factor in [1/8, 16]. Factor 1 returns
/// the input unchanged. Throws InvalidConfig for other factors and
/// ShapeMismatch when the output extents would not be integral.
Tensor resample(const Tensor& x, Ratio factor);

/// Bilinear resize to explicit extents.
Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w);

// ---------------------------------------------------------------------------
// Channel plumbing.
// ---------------------------------------------------------------------------

Tensor concat_channels(const std::vector<Tensor>& parts);
/// Channels [begin, end) of an NCHW tensor.
Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t end);

// ---------------------------------------------------------------------------
// Loss.
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy of probabilities `pred` against `target`, with
/// `pred` clamped to [eps, 1 - eps] inside the logarithms.
Tensor binary_cross_entropy(const Tensor& pred, const Tensor& target, float eps = 1e-7f);

}  // namespace dfmnet
