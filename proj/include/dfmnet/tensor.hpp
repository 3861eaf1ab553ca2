// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dfmnet {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

// Leaves elements uninitialized on resize so ops that overwrite every
// element skip a fill pass.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
  template <class U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;

  template <class U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

struct TensorImpl {
  Shape shape;
  std::vector<float, DefaultInitAllocator<float>> data;
  std::vector<float> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
};

}  // namespace detail

/// Dense fp32 array with shared-handle semantics. Copies of a Tensor alias
/// the same storage; ops never modify their inputs, so a value produced by
/// an op is effectively immutable. Parameters and BN statistics are the only
/// tensors mutated in place (by optimizers and training-mode BN).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, float value);
  static Tensor from(Shape shape, std::vector<float> values);
  /// Unspecified contents, for ops that write every element.
  static Tensor uninitialized(Shape shape);
  static Tensor scalar(float value) { return full({1}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::span<const float> data() const { return impl_->data; }
  std::span<float> mutable_data() { return impl_->data; }
  float item() const;
  float at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  /// Accumulated gradient; empty span when none was produced.
  std::span<const float> grad() const { return impl_->grad; }
  std::span<float> mutable_grad();
  void zero_grad();

  /// Deep copy of the values, detached from any tape.
  Tensor clone() const;
  /// Same storage, new shape with an equal element count.
  Tensor reshape(Shape shape) const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Records differentiable ops executed on the current thread while alive.
/// Construction makes the tape active; destruction restores the previously
/// active tape, so tapes nest. With no active tape nothing is recorded and
/// forward evaluation carries no bookkeeping cost.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Replays recorded ops in reverse, accumulating into the `grad` of every
  /// tensor that requires it. `loss` must hold exactly one element.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  static Tape* active();

  /// Registers `output` as produced by a differentiable op over `inputs`.
  /// Returns false (and records nothing) when no tape is active or no input
  /// requires a gradient.
  static bool record(const Tensor& output, std::initializer_list<const Tensor*> inputs,
                     BackwardFn backward);

 private:
  struct Node {
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  Tape* previous_ = nullptr;
};

/// Gradient accumulator for an op input: allocates on first use.
std::span<float> grad_buffer(const Tensor& t);

}  // namespace dfmnet
