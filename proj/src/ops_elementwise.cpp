// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "dfmnet/error.hpp"
#include "dfmnet/ops.hpp"

namespace dfmnet {

namespace {

struct BroadcastPlan {
  Shape out;
  std::vector<std::int64_t> stride_a;  // strides in the padded output rank, 0 on broadcast axes
  std::vector<std::int64_t> stride_b;
};

std::vector<std::int64_t> padded_strides(const Shape& shape, std::size_t rank) {
  std::vector<std::int64_t> strides(rank, 0);
  std::int64_t stride = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const std::size_t axis_in = shape.size() - 1 - i;
    const std::size_t axis_out = rank - 1 - i;
    strides[axis_out] = shape[axis_in] == 1 ? 0 : stride;
    stride *= shape[axis_in];
  }
  return strides;
}

BroadcastPlan plan(const Shape& a, const Shape& b) {
  BroadcastPlan p;
  p.out = broadcast_shape(a, b);
  p.stride_a = padded_strides(a, p.out.size());
  p.stride_b = padded_strides(b, p.out.size());
  return p;
}

// Calls fn(out_index, a_index, b_index) for every output element.
template <class Fn>
void for_each_broadcast(const BroadcastPlan& p, Fn&& fn) {
  const std::size_t rank = p.out.size();
  const std::int64_t total = numel(p.out);
  if (rank == 0) {
    fn(0, 0, 0);
    return;
  }
  const std::int64_t inner = p.out[rank - 1];
  const std::int64_t sa = p.stride_a[rank - 1];
  const std::int64_t sb = p.stride_b[rank - 1];
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t base_a = 0;
  std::int64_t base_b = 0;
  for (std::int64_t o = 0; o < total; o += inner) {
    for (std::int64_t j = 0; j < inner; ++j) fn(o + j, base_a + j * sa, base_b + j * sb);
    // Advance the outer odometer.
    for (std::size_t axis = rank - 1; axis-- > 0;) {
      ++idx[axis];
      base_a += p.stride_a[axis];
      base_b += p.stride_b[axis];
      if (idx[axis] < p.out[axis]) break;
      base_a -= p.stride_a[axis] * idx[axis];
      base_b -= p.stride_b[axis] * idx[axis];
      idx[axis] = 0;
    }
  }
}

void check_finite(std::span<const float> values, const char* op) {
  for (float v : values) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite output from ") + op);
  }
}

const char* op_name(Elementwise op) {
  switch (op) {
    case Elementwise::kAdd: return "add";
    case Elementwise::kSub: return "sub";
    case Elementwise::kMul: return "mul";
    case Elementwise::kDiv: return "div";
    case Elementwise::kRelu: return "relu";
    case Elementwise::kSigmoid: return "sigmoid";
  }
  return "?";
}

Tensor unary(Elementwise op, const Tensor& a) {
  Tensor out = Tensor::uninitialized(a.shape());
  auto x = a.data();
  auto y = out.mutable_data();
  if (op == Elementwise::kRelu) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0f / (1.0f + std::exp(-x[i]));
  }
  check_finite(y, op_name(op));
  Tape::record(out, {&a}, [op, a, out] {
    auto ga = grad_buffer(a);
    auto go = out.grad();
    auto x = a.data();
    auto y = out.data();
    if (op == Elementwise::kRelu) {
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += x[i] > 0.0f ? go[i] : 0.0f;
    } else {
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * y[i] * (1.0f - y[i]);
    }
  });
  return out;
}

template <class Fwd>
Tensor binary(Elementwise op, const Tensor& a, const Tensor& b, Fwd fwd) {
  const BroadcastPlan p = plan(a.shape(), b.shape());
  Tensor out = Tensor::uninitialized(p.out);
  auto x = a.data();
  auto z = b.data();
  auto y = out.mutable_data();
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(x[i], z[i]);
  } else {
    for_each_broadcast(p, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) { y[o] = fwd(x[ia], z[ib]); });
  }
  check_finite(y, op_name(op));
  Tape::record(out, {&a, &b}, [op, a, b, out, p] {
    auto go = out.grad();
    auto x = a.data();
    auto z = b.data();
    const bool need_a = a.requires_grad();
    const bool need_b = b.requires_grad();
    std::span<float> ga = need_a ? grad_buffer(a) : std::span<float>();
    std::span<float> gb = need_b ? grad_buffer(b) : std::span<float>();
    for_each_broadcast(p, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
      const float g = go[o];
      switch (op) {
        case Elementwise::kAdd:
          if (need_a) ga[ia] += g;
          if (need_b) gb[ib] += g;
          break;
        case Elementwise::kSub:
          if (need_a) ga[ia] += g;
          if (need_b) gb[ib] -= g;
          break;
        case Elementwise::kMul:
          if (need_a) ga[ia] += g * z[ib];
          if (need_b) gb[ib] += g * x[ia];
          break;
        case Elementwise::kDiv:
          if (need_a) ga[ia] += g / z[ib];
          if (need_b) gb[ib] -= g * x[ia] / (z[ib] * z[ib]);
          break;
        default:
          break;
      }
    });
  });
  return out;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::int64_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeMismatch("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    out[rank - 1 - i] = std::max(ea, eb);
  }
  return out;
}

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  if (!a.defined()) throw ShapeMismatch(std::string(op_name(op)) + ": undefined operand");
  switch (op) {
    case Elementwise::kRelu:
    case Elementwise::kSigmoid:
      return unary(op, a);
    default:
      break;
  }
  if (!b.defined()) throw ShapeMismatch(std::string(op_name(op)) + " needs two operands");
  switch (op) {
    case Elementwise::kAdd: return binary(op, a, b, [](float u, float v) { return u + v; });
    case Elementwise::kSub: return binary(op, a, b, [](float u, float v) { return u - v; });
    case Elementwise::kMul: return binary(op, a, b, [](float u, float v) { return u * v; });
    case Elementwise::kDiv: return binary(op, a, b, [](float u, float v) { return u / v; });
    default: break;
  }
  throw InvalidConfig("unknown elementwise op");
}

Tensor add_scalar(const Tensor& a, float s) {
  Tensor out = a.clone();
  for (float& v : out.mutable_data()) v += s;
  check_finite(out.data(), "add_scalar");
  Tape::record(out, {&a}, [a, out] {
    auto ga = grad_buffer(a);
    auto go = out.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
  });
  return out;
}

Tensor mul_scalar(const Tensor& a, float s) {
  Tensor out = a.clone();
  for (float& v : out.mutable_data()) v *= s;
  check_finite(out.data(), "mul_scalar");
  Tape::record(out, {&a}, [a, out, s] {
    auto ga = grad_buffer(a);
    auto go = out.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * s;
  });
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  Tape::record(out, {&a}, [a, out] {
    auto ga = grad_buffer(a);
    const float g = out.grad()[0];
    for (float& v : ga) v += g;
  });
  return out;
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  const auto n = static_cast<double>(a.numel());
  Tensor out = Tensor::scalar(static_cast<float>(acc / n));
  Tape::record(out, {&a}, [a, out, n] {
    auto ga = grad_buffer(a);
    const float g = static_cast<float>(out.grad()[0] / n);
    for (float& v : ga) v += g;
  });
  return out;
}

}  // namespace dfmnet
