// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/nn.hpp"

#include <cmath>

#include "dfmnet/error.hpp"

namespace dfmnet {

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

Tensor ParamStore::add(const std::string& name, Tensor tensor, bool trainable) {
  if (contains(name)) throw DuplicateName("parameter '" + name + "' registered twice");
  tensor.set_requires_grad(trainable);
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, tensor, trainable});
  return tensor;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidConfig("no parameter named '" + name + "'");
  return entries_[it->second].tensor;
}

std::vector<Tensor> ParamStore::trainable() const { return trainable(""); }

std::vector<Tensor> ParamStore::trainable(const std::string& prefix) const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) {
    if (e.trainable && e.name.compare(0, prefix.size(), prefix) == 0) out.push_back(e.tensor);
  }
  return out;
}

std::int64_t ParamStore::count(const std::string& prefix) const {
  std::int64_t total = 0;
  for (const auto& e : entries_) {
    if (e.name.compare(0, prefix.size(), prefix) == 0) total += e.tensor.numel();
  }
  return total;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kRelu: return relu(x);
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kNone: break;
  }
  return x;
}

Tensor init_conv_weight(Rng& rng, std::int64_t cout, std::int64_t cin_per_group, std::int64_t k) {
  const double std = std::sqrt(2.0 / static_cast<double>(cin_per_group * k * k));
  Tensor w = Tensor::zeros({cout, cin_per_group, k, k});
  for (float& v : w.mutable_data()) v = static_cast<float>(rng.normal() * std);
  return w;
}

BatchNorm2d BatchNorm2d::create(ParamStore& store, const std::string& prefix, std::int64_t channels) {
  BatchNorm2d bn;
  bn.gamma = store.add(prefix + ".gamma", Tensor::ones({channels}), true);
  bn.beta = store.add(prefix + ".beta", Tensor::zeros({channels}), true);
  bn.running_mean = store.add(prefix + ".running_mean", Tensor::zeros({channels}), false);
  bn.running_var = store.add(prefix + ".running_var", Tensor::ones({channels}), false);
  return bn;
}

Tensor BatchNorm2d::forward(const Tensor& x, Phase phase) const {
  return batch_norm(x, gamma, beta, running_mean, running_var, phase == Phase::kTraining);
}

ConvBnAct ConvBnAct::create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin,
                            std::int64_t cout, int k, Conv2dOptions opt, Activation act) {
  ConvBnAct layer;
  layer.opt = opt;
  layer.act = act;
  layer.weight = store.add(prefix + ".conv.w", init_conv_weight(rng, cout, cin / opt.groups, k), true);
  layer.bn = BatchNorm2d::create(store, prefix + ".bn", cout);
  return layer;
}

namespace {

// Inference without a tape: normalization and activation are applied in place
// on the convolution output, saving two passes over the feature map. The
// arithmetic matches batch_norm, relu and sigmoid term for term.
void bn_act_in_place(Tensor& y, const BatchNorm2d& bn, Activation act) {
  const std::int64_t n = y.dim(0), c = y.dim(1), plane = y.dim(2) * y.dim(3);
  auto g = bn.gamma.data();
  auto b = bn.beta.data();
  auto rm = bn.running_mean.data();
  auto rv = bn.running_var.data();
  if (g.size() != static_cast<std::size_t>(c)) {
    throw ShapeMismatch("batch_norm parameter size does not match " + to_string(y.shape()));
  }
  auto ys = y.mutable_data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    if (rv[ch] < 0.0f) throw NumericalError("negative running variance");
    const float invstd = 1.0f / std::sqrt(rv[ch] + kBatchNormEps);
    const float scale = g[ch] * invstd;
    const float shift = b[ch] - rm[ch] * scale;
    for (std::int64_t i = 0; i < n; ++i) {
      float* q = ys.data() + (i * c + ch) * plane;
      switch (act) {
        case Activation::kRelu:
          for (std::int64_t k = 0; k < plane; ++k) {
            const float v = q[k] * scale + shift;
            q[k] = v > 0.0f ? v : 0.0f;
          }
          break;
        case Activation::kSigmoid:
          for (std::int64_t k = 0; k < plane; ++k) q[k] = 1.0f / (1.0f + std::exp(-(q[k] * scale + shift)));
          break;
        case Activation::kNone:
          for (std::int64_t k = 0; k < plane; ++k) q[k] = q[k] * scale + shift;
          break;
      }
    }
  }
  for (float v : ys) {
    if (!std::isfinite(v)) throw NumericalError("non-finite output from batch_norm");
  }
}

}  // namespace

Tensor ConvBnAct::forward(const Tensor& x, Phase phase) const {
  if (phase == Phase::kInference && Tape::active() == nullptr) {
    Tensor y = conv2d(x, weight, opt);
    bn_act_in_place(y, bn, act);
    return y;
  }
  return activate(bn.forward(conv2d(x, weight, opt), phase), act);
}

ConvBnAct make_bconv(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin, std::int64_t cout,
                     int k, Activation act) {
  if (k != 1 && k != 3) throw InvalidConfig("BConv kernel must be 1 or 3");
  return ConvBnAct::create(store, rng, prefix, cin, cout, k, Conv2dOptions{1, 1, (k - 1) / 2, 1}, act);
}

ConvBnAct make_dconv(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin, std::int64_t cout) {
  return ConvBnAct::create(store, rng, prefix, cin, cout, 3, Conv2dOptions{1, 2, 2, 1}, Activation::kRelu);
}

DSConv DSConv::create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin, std::int64_t cout) {
  DSConv ds;
  ds.depthwise = ConvBnAct::create(store, rng, prefix + ".dw", cin, cin, 3,
                                   Conv2dOptions{1, 1, 1, static_cast<int>(cin)}, Activation::kRelu);
  ds.pointwise = ConvBnAct::create(store, rng, prefix + ".pw", cin, cout, 1, Conv2dOptions{}, Activation::kRelu);
  return ds;
}

Tensor DSConv::forward(const Tensor& x, Phase phase) const {
  return pointwise.forward(depthwise.forward(x, phase), phase);
}

void IrbConfig::validate() const {
  if (t < 1 || c < 1 || n < 1 || (s != 1 && s != 2)) {
    throw InvalidConfig("invalid IRB config (t=" + std::to_string(t) + ", c=" + std::to_string(c) +
                        ", n=" + std::to_string(n) + ", s=" + std::to_string(s) + ")");
  }
}

InvertedResidual InvertedResidual::create(ParamStore& store, Rng& rng, const std::string& prefix,
                                          std::int64_t cin, std::int64_t cout, int t, int stride) {
  InvertedResidual b;
  const std::int64_t hidden = cin * t;
  b.has_expand = t != 1;
  if (b.has_expand) {
    b.expand = ConvBnAct::create(store, rng, prefix + ".expand", cin, hidden, 1, Conv2dOptions{}, Activation::kRelu);
  }
  b.depthwise = ConvBnAct::create(store, rng, prefix + ".dw", hidden, hidden, 3,
                                  Conv2dOptions{stride, 1, 1, static_cast<int>(hidden)}, Activation::kRelu);
  b.project = ConvBnAct::create(store, rng, prefix + ".project", hidden, cout, 1, Conv2dOptions{}, Activation::kNone);
  b.residual = stride == 1 && cin == cout;
  return b;
}

Tensor InvertedResidual::forward(const Tensor& x, Phase phase) const {
  Tensor h = has_expand ? expand.forward(x, phase) : x;
  h = project.forward(depthwise.forward(h, phase), phase);
  return residual ? add(x, h) : h;
}

IrbStage IrbStage::create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin,
                          const IrbConfig& cfg) {
  cfg.validate();
  IrbStage stage;
  for (int i = 0; i < cfg.n; ++i) {
    stage.blocks.push_back(InvertedResidual::create(store, rng, prefix + ".irb" + std::to_string(i), cin, cfg.c,
                                                    cfg.t, i == 0 ? cfg.s : 1));
    cin = cfg.c;
  }
  return stage;
}

Tensor IrbStage::forward(const Tensor& x, Phase phase) const {
  Tensor h = x;
  for (const auto& b : blocks) h = b.forward(h, phase);
  return h;
}

Linear Linear::create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t in, std::int64_t out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w = Tensor::zeros({out, in, 1, 1});
  for (float& v : w.mutable_data()) v = static_cast<float>(rng.uniform(-bound, bound));
  Tensor b = Tensor::zeros({out});
  for (float& v : b.mutable_data()) v = static_cast<float>(rng.uniform(-bound, bound));
  Linear fc;
  fc.weight = store.add(prefix + ".w", w, true);
  fc.bias = store.add(prefix + ".b", b, true);
  return fc;
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(2) != 1 || x.dim(3) != 1) {
    throw ShapeMismatch("Linear expects N x C x 1 x 1 input, got " + to_string(x.shape()));
  }
  return conv2d(x, weight, bias, Conv2dOptions{});
}

ChannelAttention ChannelAttention::create(ParamStore& store, Rng& rng, const std::string& prefix,
                                          std::int64_t channels) {
  const std::int64_t hidden = std::max<std::int64_t>(1, channels / kReduction);
  ChannelAttention ca;
  ca.fc1 = Linear::create(store, rng, prefix + ".fc1", channels, hidden);
  ca.fc2 = Linear::create(store, rng, prefix + ".fc2", hidden, channels);
  return ca;
}

Tensor ChannelAttention::scale(const Tensor& x) const {
  if (x.rank() != 4) throw ShapeMismatch("channel attention expects NCHW input, got " + to_string(x.shape()));
  return sigmoid(fc2.forward(relu(fc1.forward(global_avg_pool(x)))));
}

Tensor ChannelAttention::forward(const Tensor& x) const { return mul(x, scale(x)); }

PyramidPooling PyramidPooling::create(ParamStore& store, Rng& rng, const std::string& prefix, std::int64_t cin,
                                      std::int64_t inner, std::int64_t cout) {
  PyramidPooling ppm;
  for (int bins : kBins) {
    ppm.branches.push_back(make_bconv(store, rng, prefix + ".bin" + std::to_string(bins), cin, inner, 1));
  }
  ppm.fuse = make_bconv(store, rng, prefix + ".fuse", cin + inner * 4, cout, 1);
  return ppm;
}

std::vector<Tensor> PyramidPooling::branch_outputs(const Tensor& x, Phase phase) const {
  if (x.rank() != 4) throw ShapeMismatch("PPM expects NCHW input, got " + to_string(x.shape()));
  std::vector<Tensor> outs;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    Tensor pooled = adaptive_avg_pool(x, kBins[i]);
    outs.push_back(resize_bilinear(branches[i].forward(pooled, phase), x.dim(2), x.dim(3)));
  }
  return outs;
}

Tensor PyramidPooling::forward(const Tensor& x, Phase phase) const {
  std::vector<Tensor> parts{x};
  for (auto& b : branch_outputs(x, phase)) parts.push_back(std::move(b));
  return fuse.forward(concat_channels(parts), phase);
}

}  // namespace dfmnet
