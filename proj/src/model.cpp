// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/model.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_map>

#include "dfmnet/error.hpp"

namespace dfmnet {

namespace {

constexpr std::int64_t kPpmInner = 80;

bool has_prefix(const std::string& s, const std::string& prefix) { return s.compare(0, prefix.size(), prefix) == 0; }

}  // namespace

const char* to_string(InputMode m) { return m == InputMode::kRgbd ? "rgbd" : "flow3"; }

InputMode parse_input_mode(const std::string& s) {
  if (s == "rgbd") return InputMode::kRgbd;
  if (s == "flow3") return InputMode::kFlow3;
  throw InvalidConfig("unknown input mode '" + s + "' (expected rgbd or flow3)");
}

void ModelConfig::validate() const {
  if (recalib_count < 0 || recalib_count > DepthHolisticAttention::kMaxRecalibration) {
    throw InvalidConfig("recalibration count must be in 0..3, got " + std::to_string(recalib_count));
  }
}

ModelConfig infer_config(const std::vector<NamedTensor>& weights) {
  ModelConfig cfg;
  const NamedTensor* first_depth = nullptr;
  bool any_dqw = false, any_dha = false;
  for (const auto& w : weights) {
    if (w.name == "tdb.h1.stem.conv.w") {
      cfg.depth_backbone = DepthBackboneKind::kMobileNet;
      first_depth = &w;
    } else if (w.name == "tdb.h1.irb0.expand.conv.w" && first_depth == nullptr) {
      first_depth = &w;
    }
    any_dqw = any_dqw || has_prefix(w.name, "dqw.");
    any_dha = any_dha || has_prefix(w.name, "dha.");
  }
  if (first_depth == nullptr || first_depth->tensor.rank() != 4) {
    throw InvalidConfig("weights contain no depth-branch input layer");
  }
  const std::int64_t in = first_depth->tensor.dim(1);
  if (in != 1 && in != 3) throw InvalidConfig("depth-branch input layer has " + std::to_string(in) + " channels");
  cfg.mode = in == 1 ? InputMode::kRgbd : InputMode::kFlow3;
  cfg.use_dqw = any_dqw;
  cfg.use_dha = any_dha;
  return cfg;
}

DfmNet::DfmNet(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  rgb_ = Encoder::mobilenet(store_, rng, "rgb", 3);
  ppm_ = PyramidPooling::create(store_, rng, "rgb.ppm", kHierarchyChannels[4], kPpmInner, kHierarchyChannels[4]);
  depth_ = config_.depth_backbone == DepthBackboneKind::kTailored
               ? Encoder::tailored(store_, rng, "tdb", TdbSpec::standard(config_.aux_channels()))
               : Encoder::mobilenet(store_, rng, "tdb", config_.aux_channels());
  if (config_.use_dqw) dqw_ = DepthQualityWeighting::create(store_, rng, "dqw");
  if (config_.use_dha) dha_ = DepthHolisticAttention::create(store_, rng, "dha");
  decoder_ = Decoder::create(store_, rng, "decoder", "heads.saliency");
  depth_head_ = make_depth_head(store_, rng, "heads.depth");
}

void DfmNet::set_gate_options(VbaVariant vba, int recalib_count, Gating gating) {
  ModelConfig next = config_;
  next.vba = vba;
  next.recalib_count = recalib_count;
  next.gating = gating;
  next.validate();
  config_ = next;
}

void DfmNet::load(const std::vector<NamedTensor>& weights) {
  const ModelConfig found = infer_config(weights);
  if (found.mode != config_.mode) {
    throw ModeMismatch(std::string("weights are for ") + to_string(found.mode) + " input, model is " +
                       to_string(config_.mode));
  }
  if (weights.size() != store_.size()) {
    throw InvalidConfig("weights hold " + std::to_string(weights.size()) + " tensors, model expects " +
                        std::to_string(store_.size()));
  }
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& w : weights) by_name[w.name] = &w.tensor;
  for (const auto& e : store_.entries()) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) throw InvalidConfig("weights lack '" + e.name + "'");
    if (it->second->shape() != e.tensor.shape()) {
      throw InvalidConfig("'" + e.name + "' has shape " + to_string(it->second->shape()) + ", expected " +
                          to_string(e.tensor.shape()));
    }
  }
  for (const auto& e : store_.entries()) {
    Tensor dst = e.tensor;
    auto src = by_name.at(e.name)->data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
  }
}

ForwardResult DfmNet::forward(const Tensor& rgb, const Tensor& aux, Phase phase) const {
  check_encoder_input(rgb, 3, "RGB input");
  if (!aux.defined() || aux.rank() != 4) throw ShapeMismatch("auxiliary input must be NCHW");
  if (aux.dim(1) != config_.aux_channels()) {
    throw ModeMismatch(std::string("model in ") + to_string(config_.mode) + " mode expects " +
                       std::to_string(config_.aux_channels()) + "-channel auxiliary input, got " +
                       to_string(aux.shape()));
  }
  if (aux.dim(0) != rgb.dim(0) || aux.dim(2) != rgb.dim(2) || aux.dim(3) != rgb.dim(3)) {
    throw ShapeMismatch("RGB " + to_string(rgb.shape()) + " and auxiliary " + to_string(aux.shape()) +
                        " inputs differ in batch or extents");
  }

  ForwardResult out;
  out.depth = depth_.forward(aux, phase);
  const Tensor f_r1 = rgb_.step(0, rgb, phase);
  const Tensor& f_d1 = out.depth.f[0];
  if (config_.use_dqw) out.alpha = dqw_.forward(f_r1, f_d1, config_.vba, phase);
  if (config_.use_dha) {
    out.beta = dha_.forward(f_r1, f_d1, out.depth.f[kHierarchies - 1], config_.recalib_count, phase);
  }

  for (int i = 0; i < kHierarchies; ++i) {
    out.rgb.f[i] = i == 0 ? f_r1 : rgb_.step(i, out.fused.f[i - 1], phase);
    Tensor alpha, beta;
    if (config_.use_dqw) alpha = out.alpha.at(config_.gating == Gating::kIdentical ? 0 : i);
    if (config_.use_dha) beta = out.beta.maps[i];
    out.fused.f[i] = fuse(out.rgb.f[i], out.depth.f[i], alpha, beta);
  }
  out.fused.f6 = ppm_.forward(out.fused.f[kHierarchies - 1], phase);

  out.saliency = decoder_.fullfuse(decoder_.prefuse(out.fused, phase), phase);
  out.depth_saliency = depth_head_.forward(out.depth.f[kHierarchies - 1]);
  return out;
}

Tensor saliency_loss(const Tensor& saliency, const Tensor& depth_saliency, const Tensor& gt) {
  if (saliency.shape() != gt.shape() || depth_saliency.shape() != gt.shape()) {
    throw ShapeMismatch("loss maps " + to_string(saliency.shape()) + ", " + to_string(depth_saliency.shape()) +
                        " must match ground truth " + to_string(gt.shape()));
  }
  return add(binary_cross_entropy(saliency, gt), binary_cross_entropy(depth_saliency, gt));
}

}  // namespace dfmnet
