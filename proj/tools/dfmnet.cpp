// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella command line: train, infer, eval, bench and quality.
//
// Exit codes: 0 success, 1 usage error (bad flags or flag combinations),
// 2 data error (missing or malformed files, mode mismatches).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dfmnet/bench.hpp"
#include "dfmnet/dfmw.hpp"
#include "dfmnet/error.hpp"
#include "dfmnet/image_io.hpp"
#include "dfmnet/metrics.hpp"
#include "dfmnet/model.hpp"
#include "dfmnet/quality.hpp"
#include "dfmnet/train.hpp"

namespace fs = std::filesystem;
using namespace dfmnet;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

const std::vector<std::string> kCommands = {"train", "infer", "eval", "bench", "quality"};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config file merging. Keys mirror long flag names; a key is injected only
// when the command line does not already carry that flag, so flags win.

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

std::vector<std::string> config_to_args(const nlohmann::json& config, const std::vector<std::string>& given) {
  if (!config.is_object()) throw DecodeError("config file must hold a JSON object");
  std::vector<std::string> out;
  for (const auto& [key, value] : config.items()) {
    const std::string flag = "--" + key;
    if (has_flag(given, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      out.push_back(flag);
      out.push_back(joined);
    } else if (value.is_string()) {
      out.push_back(flag);
      out.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      out.push_back(flag);
      out.push_back(value.dump());
    } else {
      throw DecodeError("config key '" + key + "' must be a boolean, number, string or array");
    }
  }
  return out;
}

// Removes --config from the arguments and splices the file's flags in right
// after the subcommand name.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size();) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  if (!path) return args;

  std::ifstream in(*path);
  if (!in) throw MissingFile("cannot open config file " + *path);
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DecodeError("config file " + *path + ": " + e.what());
  }
  auto sub = std::find_first_of(args.begin() + 1, args.end(), kCommands.begin(), kCommands.end());
  if (sub == args.end()) throw UsageError("--config needs a subcommand");
  const std::vector<std::string> extra = config_to_args(config, args);
  args.insert(sub + 1, extra.begin(), extra.end());
  return args;
}

// ---------------------------------------------------------------------------
// Model flags shared by the subcommands that build or load a network.

struct ModelFlags {
  std::string mode;  // empty: rgbd for training, taken from weights otherwise
  std::string depth_backbone = "tailored";
  bool no_dqw = false;
  bool no_dha = false;
  std::string vba;
  int recalib_count = -1;
  std::string gating;

  void add_to(CLI::App* cmd, bool structural) {
    cmd->add_option("--mode", mode, "Auxiliary input: rgbd (depth) or flow3 (optical flow)")
        ->check(CLI::IsMember({"rgbd", "flow3"}));
    if (structural) {
      cmd->add_option("--depth-backbone", depth_backbone, "Depth encoder: tailored or mobilenet")
          ->check(CLI::IsMember({"tailored", "mobilenet"}));
    }
    cmd->add_flag("--no-dqw", no_dqw, "Disable depth quality weighting (alpha = 1)");
    cmd->add_flag("--no-dha", no_dha, "Disable depth holistic attention (beta = 1)");
    cmd->add_option("--vba-variant", vba, "Alignment vector: proposed, dice, add or mul")
        ->check(CLI::IsMember({"proposed", "dice", "add", "mul"}));
    cmd->add_option("--recalib-count", recalib_count, "Recalibration convolutions in the attention branch")
        ->check(CLI::Range(0, 3));
    cmd->add_option("--gating", gating, "Per-hierarchy gates (multiple) or one shared gate (identical)")
        ->check(CLI::IsMember({"multiple", "identical"}));
  }

  void apply_gates(ModelConfig& c) const {
    if (!vba.empty()) c.vba = parse_vba_variant(vba);
    if (recalib_count >= 0) c.recalib_count = recalib_count;
    if (!gating.empty()) c.gating = parse_gating(gating);
  }

  ModelConfig fresh() const {
    ModelConfig c;
    c.mode = mode.empty() ? InputMode::kRgbd : parse_input_mode(mode);
    c.depth_backbone = depth_backbone == "mobilenet" ? DepthBackboneKind::kMobileNet : DepthBackboneKind::kTailored;
    c.use_dqw = !no_dqw;
    c.use_dha = !no_dha;
    apply_gates(c);
    return c;
  }

  // Structure comes from the file; flags may only restate it.
  ModelConfig for_weights(const std::vector<NamedTensor>& weights) const {
    ModelConfig c = infer_config(weights);
    if (!mode.empty() && parse_input_mode(mode) != c.mode) {
      throw ModeMismatch(std::string("weights were trained for --mode ") + to_string(c.mode) + ", not " + mode);
    }
    if (no_dqw && c.use_dqw) throw UsageError("--no-dqw conflicts with weights that contain a weighting module");
    if (no_dha && c.use_dha) throw UsageError("--no-dha conflicts with weights that contain an attention module");
    apply_gates(c);
    return c;
  }
};

DfmNet load_model(const fs::path& path, const ModelFlags& flags) {
  const std::vector<NamedTensor> weights = load_weights(path);
  ModelConfig config = flags.for_weights(weights);
  config.validate();
  DfmNet net(config, 0);
  net.load(weights);
  return net;
}

Tensor add_batch_dim(const Tensor& t) { return t.reshape({1, t.dim(0), t.dim(1), t.dim(2)}); }

// 1 x 1 x H x W prediction as H x W.
Tensor first_map(const Tensor& batch) { return batch.reshape({batch.dim(2), batch.dim(3)}); }

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw MissingFile("cannot write " + path.string());
  return out;
}

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ModelFlags model;
  fs::path data;
  fs::path joint;
  fs::path init;
  fs::path out;
  fs::path log;
  std::int64_t steps = 0;
  std::int64_t epochs = 1;
  int batch = 10;
  double lr = 1e-4;
  double lr_power = 0.9;
  bool no_augment = false;
  std::uint64_t seed = 0;
  int log_every = 10;
};

std::vector<Sample> load_set(const fs::path& root, InputMode mode) {
  const DatasetManifest manifest = scan_dataset(root, mode);
  std::vector<Sample> samples;
  for (const auto& e : manifest.entries) samples.push_back(load_sample(e, mode));
  return samples;
}

// Still images with masks only: <root>/RGB and <root>/GT.
std::vector<Sample> load_stills(const fs::path& root) {
  std::vector<Sample> samples;
  const auto masks = list_images(root / "GT");
  for (const auto& [stem, rgb] : list_images(root / "RGB")) {
    auto gt = std::find_if(masks.begin(), masks.end(), [&](const auto& m) { return m.first == stem; });
    if (gt == masks.end()) throw MissingFile("no mask for '" + stem + "' in " + (root / "GT").string());
    samples.push_back(load_sample(ManifestEntry{stem, rgb, {}, gt->second}, InputMode::kRgbd));
  }
  if (samples.empty()) throw EmptyDataset("no images in " + (root / "RGB").string());
  return samples;
}

int run_train(const TrainArgs& a) {
  ModelConfig config = a.model.fresh();
  config.validate();
  std::vector<Sample> data = load_set(a.data, config.mode);
  if (!a.joint.empty()) {
    if (config.mode != InputMode::kFlow3) throw UsageError("--joint is only meaningful with --mode flow3");
    data = mix_samples(data, make_joint_pairs(load_stills(a.joint), config.mode), a.seed);
  }

  DfmNet net(config, a.seed);
  if (!a.init.empty()) net.load(load_weights(a.init));

  std::optional<std::ofstream> log;
  if (!a.log.empty()) {
    log = open_output(a.log);
    *log << "step,lr,loss\n";
  }
  TrainOptions opt;
  opt.steps = a.steps > 0 ? a.steps : steps_for_epochs(a.epochs, data.size(), a.batch);
  opt.batch_size = a.batch;
  opt.base_lr = a.lr;
  opt.lr_power = a.lr_power;
  opt.augment = !a.no_augment;
  opt.seed = a.seed;
  opt.on_step = [&](const StepReport& r) {
    if (log) *log << r.step << ',' << r.lr << ',' << fmt(r.loss) << '\n';
    if ((r.step + 1) % a.log_every == 0 || r.step + 1 == opt.steps) {
      std::cerr << "step " << r.step + 1 << '/' << opt.steps << "  lr " << r.lr << "  loss " << fmt(r.loss, 4)
                << '\n';
    }
  };
  std::cerr << "training on " << data.size() << " samples for " << opt.steps << " steps\n";
  train(net, data, opt);
  save_weights(a.out, net.weights());
  std::cout << "wrote " << a.out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  ModelFlags model;
  fs::path weights;
  fs::path rgb;
  fs::path depth;
  fs::path flow;
  fs::path out;
  fs::path depth_out;
  fs::path data;
  fs::path out_dir;
};

void predict(const DfmNet& net, const Sample& s, const fs::path& out, const fs::path& depth_out) {
  const ForwardResult r = net.forward(add_batch_dim(s.rgb), add_batch_dim(s.aux), Phase::kInference);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(out, first_map(r.saliency));
  if (!depth_out.empty()) {
    if (depth_out.has_parent_path()) fs::create_directories(depth_out.parent_path());
    write_png(depth_out, first_map(r.depth_saliency));
  }
}

int run_infer(const InferArgs& a) {
  const bool single = !a.rgb.empty();
  if (single == !a.data.empty()) throw UsageError("give either --rgb with --depth/--flow, or --data");
  const DfmNet net = load_model(a.weights, a.model);
  const InputMode mode = net.config().mode;

  if (!single) {
    if (a.out_dir.empty()) throw UsageError("--data needs --out-dir");
    const DatasetManifest manifest = scan_dataset(a.data, mode, false);
    for (const auto& e : manifest.entries) {
      predict(net, load_sample(e, mode), a.out_dir / (e.id + ".png"), {});
    }
    std::cout << "wrote " << manifest.entries.size() << " maps to " << a.out_dir.string() << '\n';
    return 0;
  }

  if (a.out.empty()) throw UsageError("--rgb needs --out");
  const fs::path& aux = mode == InputMode::kRgbd ? a.depth : a.flow;
  if (aux.empty()) {
    throw UsageError(mode == InputMode::kRgbd ? "rgbd weights need --depth" : "flow3 weights need --flow");
  }
  if (!(mode == InputMode::kRgbd ? a.flow : a.depth).empty()) {
    throw ModeMismatch(std::string("weights expect ") + (mode == InputMode::kRgbd ? "--depth" : "--flow") +
                       " input");
  }
  predict(net, load_sample(ManifestEntry{a.rgb.stem().string(), a.rgb, aux, {}}, mode), a.out, a.depth_out);
  std::cout << "wrote " << a.out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  fs::path pred;
  fs::path gt;
  fs::path out;
};

int run_eval(const EvalArgs& a) {
  const auto preds = list_images(a.pred);
  const auto masks = list_images(a.gt);
  if (masks.empty()) throw EmptyDataset("no masks in " + a.gt.string());

  std::ofstream out = open_output(a.out);
  out << "id,s_alpha,f_max,e_max,mae\n";
  std::vector<EvalResult> results;
  for (const auto& [stem, gt_path] : masks) {
    auto p = std::find_if(preds.begin(), preds.end(), [&](const auto& x) { return x.first == stem; });
    if (p == preds.end()) throw MissingFile("no prediction for '" + stem + "' in " + a.pred.string());
    Tensor g = image_to_tensor(read_image(gt_path), 1).clone();
    for (float& v : g.mutable_data()) v = v >= 0.5f ? 1.0f : 0.0f;
    const Tensor s = resize_image(image_to_tensor(read_image(p->second), 1), g.dim(1), g.dim(2));
    const EvalResult r = evaluate(s, g);
    out << stem << ',' << fmt(r.s_alpha) << ',' << fmt(r.f_beta_max) << ',' << fmt(r.e_xi_max) << ','
        << fmt(r.mae) << '\n';
    results.push_back(r);
  }
  const EvalResult m = mean_result(results);
  out << "mean," << fmt(m.s_alpha) << ',' << fmt(m.f_beta_max) << ',' << fmt(m.e_xi_max) << ',' << fmt(m.mae)
      << '\n';
  std::cout << results.size() << " images  S " << fmt(m.s_alpha, 3) << "  maxF " << fmt(m.f_beta_max, 3)
            << "  maxE " << fmt(m.e_xi_max, 3) << "  MAE " << fmt(m.mae, 3) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  ModelFlags model;
  fs::path weights;
  std::vector<std::int64_t> batches = {1};
  std::int64_t n = 100;
  std::int64_t resolution = 256;
  int warmup = 3;
  fs::path out;
};

int run_bench(const BenchArgs& a) {
  std::optional<DfmNet> net;
  if (a.weights.empty()) {
    ModelConfig config = a.model.fresh();
    config.validate();
    net.emplace(config, 0);
  } else {
    net.emplace(load_model(a.weights, a.model));
  }
  if (a.resolution % kInputGranularity != 0) {
    throw UsageError("--resolution must be a multiple of " + std::to_string(kInputGranularity));
  }

  const SizeReport size = size_report(net->weights());
  for (const auto& s : size.subtrees) std::cout << s.name << ' ' << fmt(s.mb(), 4) << " MB\n";
  std::cout << "total " << fmt(size.total.mb(), 4) << " MB (" << size.total.params << " parameters)\n";

  BenchOptions opt;
  opt.n = a.n;
  opt.resolution = a.resolution;
  opt.warmup = a.warmup;
  std::cout << "latency " << fmt(median_latency_ms(*net, 5, opt), 2) << " ms (median of 5, batch 1)\n";

  std::optional<std::ofstream> out;
  if (!a.out.empty()) {
    out = open_output(a.out);
    *out << "batch,n,resolution,threads,seconds,fps\n";
  }
  for (std::int64_t b : a.batches) {
    const ThroughputResult r = measure_throughput(*net, b, opt);
    std::cout << "batch " << b << "  " << fmt(r.fps, 2) << " fps  (" << fmt(r.seconds, 3) << " s)\n";
    if (out) {
      *out << r.batch << ',' << r.n << ',' << r.resolution << ',' << kBenchThreads << ',' << fmt(r.seconds) << ','
           << fmt(r.fps) << '\n';
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// quality

struct QualityArgs {
  std::string mode = "rgbd";
  fs::path pairs;
  bool shuffle = false;
  std::uint64_t seed = 0;
  fs::path alpha_from;
  fs::path out;
};

void print_summary(const char* name, const DistributionSummary& s) {
  std::cout << name << " mean " << fmt(s.mean, 4) << "  std " << fmt(s.std, 4) << "\n  histogram";
  for (std::int64_t c : s.histogram) std::cout << ' ' << c;
  std::cout << '\n';
}

int run_quality(const QualityArgs& a) {
  const InputMode mode = parse_input_mode(a.mode);
  std::optional<DfmNet> net;
  if (!a.alpha_from.empty()) {
    ModelFlags flags;
    flags.mode = a.mode;
    net.emplace(load_model(a.alpha_from, flags));
  }
  const DatasetManifest manifest = scan_dataset(a.pairs, mode, false);
  std::vector<QualityPair> pairs;
  for (const auto& e : manifest.entries) {
    Sample s = load_sample(e, mode);
    pairs.push_back(QualityPair{s.id, s.rgb, s.aux});
  }

  AuditOptions opt;
  opt.shuffle = a.shuffle;
  opt.seed = a.seed;
  opt.alpha_model = net ? &*net : nullptr;
  const QualityReport report = audit_set(pairs, opt);

  std::ofstream out = open_output(a.out);
  out << "id,c_dice,alpha_bar\n";
  for (const auto& e : report.entries) {
    out << e.id << ',' << fmt(e.c_dice) << ',' << (e.alpha_bar ? fmt(*e.alpha_bar) : "") << '\n';
  }
  print_summary("c_dice", report.c_dice);
  if (report.alpha_bar) print_summary("alpha_bar", *report.alpha_bar);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lightweight RGB-D salient object detection"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with flat keys mirroring the flags (flags win)");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model on a dataset directory");
  train->add_option("--data", train_args.data, "Dataset root with RGB/, depth/ (or flow/) and GT/")->required();
  train->add_option("--out", train_args.out, "Output weights (.dfmw)")->required();
  train->add_option("--init", train_args.init, "Start from these weights");
  train->add_option("--joint", train_args.joint, "Still-image set (RGB/, GT/) mixed in with black flow");
  train->add_option("--steps", train_args.steps, "Optimizer steps (overrides --epochs)")->check(CLI::PositiveNumber);
  train->add_option("--epochs", train_args.epochs, "Passes over the data")->check(CLI::PositiveNumber);
  train->add_option("--batch", train_args.batch, "Batch size")->check(CLI::PositiveNumber);
  train->add_option("--lr", train_args.lr, "Base learning rate")->check(CLI::PositiveNumber);
  train->add_option("--lr-power", train_args.lr_power, "Poly schedule exponent")->check(CLI::NonNegativeNumber);
  train->add_flag("--no-augment", train_args.no_augment, "Disable flip and crop augmentation");
  train->add_option("--seed", train_args.seed, "Seed for initialization, shuffling and augmentation");
  train->add_option("--log", train_args.log, "Per-step CSV log (step, lr, loss)");
  train->add_option("--log-every", train_args.log_every, "Progress line interval")->check(CLI::PositiveNumber);
  train_args.model.add_to(train, true);

  InferArgs infer_args;
  CLI::App* infer = app.add_subcommand("infer", "Predict saliency maps");
  infer->add_option("--weights", infer_args.weights, "Trained weights (.dfmw)")->required();
  infer->add_option("--rgb", infer_args.rgb, "RGB image");
  infer->add_option("--depth", infer_args.depth, "Depth image (rgbd weights)");
  infer->add_option("--flow", infer_args.flow, "Flow image (flow3 weights)");
  infer->add_option("--out", infer_args.out, "Output saliency PNG");
  infer->add_option("--depth-out", infer_args.depth_out, "Also write the depth-branch prediction");
  infer->add_option("--data", infer_args.data, "Dataset root to predict in bulk");
  infer->add_option("--out-dir", infer_args.out_dir, "Output directory for --data");
  infer_args.model.add_to(infer, false);

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Score predicted maps against masks");
  eval->add_option("--pred", eval_args.pred, "Directory of predicted maps")->required();
  eval->add_option("--gt", eval_args.gt, "Directory of ground-truth masks")->required();
  eval->add_option("--out", eval_args.out, "Per-image CSV")->required();

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "Measure size, latency and throughput");
  bench->add_option("--weights", bench_args.weights, "Weights to time (random initialization if absent)");
  bench->add_option("--batch", bench_args.batches, "Batch sizes, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench->add_option("--n", bench_args.n, "Timed forward passes per batch size")->check(CLI::PositiveNumber);
  bench->add_option("--resolution", bench_args.resolution, "Square input size (multiple of 32)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--warmup", bench_args.warmup, "Untimed passes before timing")->check(CLI::NonNegativeNumber);
  bench->add_option("--out", bench_args.out, "Throughput CSV");
  bench_args.model.add_to(bench, true);

  QualityArgs quality_args;
  CLI::App* quality = app.add_subcommand("quality", "Audit RGB/depth boundary alignment");
  quality->add_option("--pairs", quality_args.pairs, "Root with RGB/ and depth/ (or flow/)")->required();
  quality->add_option("--mode", quality_args.mode, "rgbd or flow3")->check(CLI::IsMember({"rgbd", "flow3"}));
  quality->add_flag("--shuffle", quality_args.shuffle, "Pair every RGB image with another image's depth");
  quality->add_option("--seed", quality_args.seed, "Seed for --shuffle");
  quality->add_option("--alpha-from", quality_args.alpha_from, "Weights used to report the mean gate value");
  quality->add_option("--out", quality_args.out, "Report CSV (id, c_dice, alpha_bar)")->required();

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args));
    std::vector<char*> ptrs;
    for (auto& s : args) ptrs.push_back(s.data());
    try {
      app.parse(static_cast<int>(ptrs.size()), ptrs.data());
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    if (train->parsed()) return run_train(train_args);
    if (infer->parsed()) return run_infer(infer_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (bench->parsed()) return run_bench(bench_args);
    if (quality->parsed()) return run_quality(quality_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
