// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfmnet/error.hpp"

namespace dfmnet {

namespace {

Tensor stack(const std::vector<const Sample*>& samples, Tensor Sample::*field) {
  const Tensor& first = samples.front()->*field;
  Shape shape{static_cast<std::int64_t>(samples.size())};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(numel(shape)));
  for (const Sample* s : samples) {
    const Tensor& t = s->*field;
    if (t.shape() != first.shape()) {
      throw ShapeMismatch("sample '" + s->id + "' has shape " + to_string(t.shape()) + ", batch has " +
                          to_string(first.shape()));
    }
    values.insert(values.end(), t.data().begin(), t.data().end());
  }
  return Tensor::from(std::move(shape), std::move(values));
}

Tensor with_batch(const Tensor& t) {
  Shape s{1};
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  return t.reshape(s);
}

Tensor drop_batch(const Tensor& t) { return t.reshape(Shape(t.shape().begin() + 1, t.shape().end())); }

Tensor flip_horizontal(const Tensor& t) {
  Tensor out = t.clone();
  const std::int64_t w = t.dim(t.rank() - 1);
  auto d = out.mutable_data();
  for (std::int64_t row = 0; row < t.numel() / w; ++row) std::reverse(d.begin() + row * w, d.begin() + (row + 1) * w);
  return out;
}

Tensor crop(const Tensor& t, std::int64_t top, std::int64_t left, std::int64_t h, std::int64_t w) {
  const std::int64_t c = t.dim(0), src_h = t.dim(1), src_w = t.dim(2);
  Tensor out = Tensor::zeros({c, h, w});
  auto src = t.data();
  auto dst = out.mutable_data();
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j) dst[(k * h + i) * w + j] = src[(k * src_h + top + i) * src_w + left + j];
  return out;
}

Tensor crop_resize(const Tensor& t, std::int64_t top, std::int64_t left, std::int64_t h, std::int64_t w) {
  return drop_batch(resize_bilinear(with_batch(crop(t, top, left, h, w)), t.dim(1), t.dim(2)));
}

}  // namespace

Batch make_batch(const std::vector<const Sample*>& samples) {
  if (samples.empty()) throw EmptyDataset("cannot batch zero samples");
  return Batch{stack(samples, &Sample::rgb), stack(samples, &Sample::aux), stack(samples, &Sample::gt)};
}

double poly_lr(double base, std::int64_t t, std::int64_t total, double power) {
  if (total <= 0) throw InvalidConfig("schedule length must be positive");
  const double frac = std::clamp(static_cast<double>(t) / static_cast<double>(total), 0.0, 1.0);
  return base * std::pow(1.0 - frac, power);
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    auto w = p.mutable_data();
    auto g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * gi);
      v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * gi * gi);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

Sample augment(const Sample& s, Rng& rng, double min_crop) {
  Sample out = s;
  if (rng.coin()) {
    out.rgb = flip_horizontal(out.rgb);
    out.aux = flip_horizontal(out.aux);
    out.gt = flip_horizontal(out.gt);
  }
  const std::int64_t h = s.rgb.dim(1), w = s.rgb.dim(2);
  const double scale = rng.uniform(min_crop, 1.0);
  const auto ch = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::lround(scale * h)));
  const auto cw = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::lround(scale * w)));
  const auto top = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(h - ch + 1)));
  const auto left = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(w - cw + 1)));
  if (ch != h || cw != w) {
    out.rgb = crop_resize(out.rgb, top, left, ch, cw);
    out.aux = crop_resize(out.aux, top, left, ch, cw);
    out.gt = crop_resize(out.gt, top, left, ch, cw);
    for (float& v : out.gt.mutable_data()) v = v >= 0.5f ? 1.0f : 0.0f;
  }
  return out;
}

std::int64_t steps_for_epochs(std::int64_t epochs, std::size_t samples, int batch_size) {
  if (batch_size < 1) throw InvalidConfig("batch size must be positive");
  const auto per_epoch = static_cast<std::int64_t>((samples + static_cast<std::size_t>(batch_size) - 1) /
                                                   static_cast<std::size_t>(batch_size));
  return epochs * per_epoch;
}

std::vector<double> train(DfmNet& net, const std::vector<Sample>& dataset, const TrainOptions& options) {
  if (dataset.empty()) throw EmptyDataset("training set is empty");
  if (options.steps < 1) throw InvalidConfig("training needs at least one step");
  if (options.batch_size < 1) throw InvalidConfig("batch size must be positive");

  Rng rng(options.seed);
  Adam adam(net.weights().trainable());
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<double> losses;

  for (std::int64_t t = 0; t < options.steps; ++t) {
    std::vector<Sample> drawn;
    for (int b = 0; b < options.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      const Sample& s = dataset[order[cursor++]];
      drawn.push_back(options.augment ? augment(s, rng) : s);
    }
    std::vector<const Sample*> ptrs;
    for (const auto& s : drawn) ptrs.push_back(&s);
    const Batch batch = make_batch(ptrs);

    net.weights().zero_grad();
    double loss = 0.0;
    {
      Tape tape;
      ForwardResult out = net.forward(batch.rgb, batch.aux, Phase::kTraining);
      Tensor l = saliency_loss(out.saliency, out.depth_saliency, batch.gt);
      loss = l.item();
      tape.backward(l);
    }
    const double lr = poly_lr(options.base_lr, t, options.steps, options.lr_power);
    adam.step(lr);
    losses.push_back(loss);
    if (options.on_step) options.on_step(StepReport{t, lr, loss});
  }
  return losses;
}

std::vector<Sample> make_joint_pairs(const std::vector<Sample>& rgb_only, InputMode mode) {
  if (mode != InputMode::kFlow3) throw ModeMismatch("all-black pseudo-flow pairs need flow3 mode");
  std::vector<Sample> out;
  for (const auto& s : rgb_only) {
    Sample p = s;
    p.aux = Tensor::zeros({3, s.rgb.dim(1), s.rgb.dim(2)});
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Sample> mix_samples(const std::vector<Sample>& a, const std::vector<Sample>& b, std::uint64_t seed) {
  std::vector<Sample> out = a;
  out.insert(out.end(), b.begin(), b.end());
  Rng rng(seed);
  rng.shuffle(out);
  return out;
}

}  // namespace dfmnet
