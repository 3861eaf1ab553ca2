// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/tensor.hpp"

#include <sstream>

#include "dfmnet/error.hpp"

namespace dfmnet {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  for (auto extent : shape) {
    if (extent <= 0) throw ShapeMismatch("non-positive extent in shape " + to_string(shape));
  }
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0f); }

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0f); }

Tensor Tensor::full(Shape shape, float value) {
  validate_shape(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data.assign(static_cast<std::size_t>(dfmnet::numel(shape)), value);
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::uninitialized(Shape shape) {
  validate_shape(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data.resize(static_cast<std::size_t>(dfmnet::numel(shape)));
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<float> values) {
  validate_shape(shape);
  if (dfmnet::numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeMismatch("shape " + to_string(shape) + " does not hold " +
                        std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(values.begin(), values.end());
  return Tensor(std::move(impl));
}

std::int64_t Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeMismatch("axis out of range for shape " + to_string(shape()));
  return impl_->shape[static_cast<std::size_t>(axis)];
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeMismatch("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

float Tensor::at(std::initializer_list<std::int64_t> index) const {
  if (index.size() != impl_->shape.size()) throw ShapeMismatch("index rank mismatch");
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    const auto extent = impl_->shape[axis++];
    if (i < 0 || i >= extent) throw ShapeMismatch("index out of range");
    flat = flat * extent + i;
  }
  return impl_->data[static_cast<std::size_t>(flat)];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

std::span<float> Tensor::mutable_grad() { return grad_buffer(*this); }

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::reshape(Shape shape) const {
  validate_shape(shape);
  if (dfmnet::numel(shape) != numel()) {
    throw ShapeMismatch("cannot reshape " + to_string(impl_->shape) + " to " + to_string(shape));
  }
  // Reshape shares storage but must keep gradients flowing: record an
  // identity node that copies the output gradient back.
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = impl_->data;
  Tensor out(std::move(impl));
  const Tensor in = *this;
  Tape::record(out, {&in}, [in, out] {
    auto g = grad_buffer(in);
    auto go = out.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
  });
  return out;
}

std::span<float> grad_buffer(const Tensor& t) {
  auto& impl = *t.impl();
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0f);
  return impl.grad;
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

bool Tape::record(const Tensor& output, std::initializer_list<const Tensor*> inputs,
                  BackwardFn backward) {
  Tape* tape = g_active_tape;
  if (tape == nullptr) return false;
  bool any = false;
  for (const Tensor* in : inputs) any = any || (in != nullptr && in->requires_grad());
  if (!any) return false;
  output.impl()->requires_grad = true;
  tape->nodes_.push_back(Node{output.impl(), std::move(backward)});
  return true;
}

void Tape::backward(const Tensor& loss) {
  if (nodes_.empty()) throw EmptyTape("backward() called with nothing recorded");
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeMismatch("backward() needs a single-element loss");
  }
  if (!loss.requires_grad()) throw EmptyTape("loss does not depend on any recorded op");
  auto seed = grad_buffer(loss);
  seed[0] += 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

}  // namespace dfmnet
