// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfmnet/dfmw.hpp"
#include "dfmnet/image_io.hpp"
#include "dfmnet/model.hpp"
#include "support/compare.hpp"
#include "support/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace dfmnet;
using dfmnet::testing::max_abs_diff;
using dfmnet::testing::random_tensor;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dfmnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with `args`; stderr is kept in err_.
  int run(const std::string& args) {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string(DFMNET_CLI) + " " + args + " >/dev/null 2>" + err.string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    err_ = ss.str();
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write_inputs() {
    Rng rng(1);
    write_png(dir_ / "a.png", random_tensor(rng, {3, 300, 200}, 0.0, 1.0));
    write_png(dir_ / "d.png", random_tensor(rng, {1, 300, 200}, 0.0, 1.0), 16);
    save_weights(dir_ / "w.dfmw", DfmNet(ModelConfig{}, 2).weights());
  }

  fs::path dir_;
  std::string err_;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_F(Cli, InferWritesEightBitSaliencyMap) {
  write_inputs();
  ASSERT_EQ(run("infer --weights " + path("w.dfmw") + " --rgb " + path("a.png") + " --depth " + path("d.png") +
                " --out " + path("s.png")),
            0)
      << err_;
  const Image img = read_image(dir_ / "s.png");
  EXPECT_EQ(img.width, 256);
  EXPECT_EQ(img.height, 256);
  EXPECT_EQ(img.channels, 1);
  EXPECT_EQ(img.max_value, 255u);

  DfmNet net(ModelConfig{}, 0);
  net.load(load_weights(dir_ / "w.dfmw"));
  const Sample s = load_sample({"a", dir_ / "a.png", dir_ / "d.png", {}}, InputMode::kRgbd);
  const Tensor sal = net.forward(s.rgb.reshape({1, 3, 256, 256}), s.aux.reshape({1, 1, 256, 256}),
                                 Phase::kInference)
                         .saliency;
  EXPECT_LE(max_abs_diff(image_to_tensor(img, 1).reshape({1, 1, 256, 256}), sal), 0.5f / 255.0f + 1e-6f);
}

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run("infer --weights w --rgb a --depth d --out s --bogus 1"), 1);
  EXPECT_NE(err_.find("--bogus"), std::string::npos) << err_;
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("bench --mode rgb"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, DataErrorsExitWithTwo) {
  write_inputs();
  EXPECT_EQ(run("infer --weights " + path("w.dfmw") + " --rgb " + path("a.png") + " --depth " + path("nope.png") +
                " --out " + path("s.png")),
            2);
  EXPECT_NE(err_.find("MissingFile"), std::string::npos) << err_;
  EXPECT_FALSE(fs::exists(dir_ / "s.png"));
  EXPECT_EQ(run("infer --weights " + path("w.dfmw") + " --rgb " + path("a.png") + " --flow " + path("a.png") +
                " --out " + path("s.png")),
            1);
  EXPECT_NE(err_.find("--depth"), std::string::npos) << err_;
  EXPECT_EQ(run("infer --weights " + path("a.png") + " --rgb " + path("a.png") + " --depth " + path("d.png") +
                " --out " + path("s.png")),
            2);
  EXPECT_NE(err_.find("CorruptFile"), std::string::npos) << err_;
}

TEST_F(Cli, ConfigFileMergesAndFlagsWin) {
  std::ofstream(dir_ / "c.json") << R"({"n": 1, "resolution": 64, "warmup": 0, "batch": [1, 2]})";
  ASSERT_EQ(run("bench --config " + path("c.json") + " --resolution 32 --out " + path("b.csv")), 0) << err_;
  std::istringstream csv(read_text(dir_ / "b.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "batch,n,resolution,threads,seconds,fps");
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("1,1,32,1,", 0), 0u) << line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("2,1,32,1,", 0), 0u) << line;

  std::ofstream(dir_ / "bad.json") << R"({"no-such-flag": 1})";
  EXPECT_EQ(run("bench --config " + path("bad.json")), 1);
  EXPECT_EQ(run("bench --config " + path("absent.json")), 2);
}

TEST_F(Cli, EvalScoresPredictionDirectory) {
  fs::create_directories(dir_ / "pred");
  fs::create_directories(dir_ / "gt");
  Tensor g = Tensor::zeros({1, 16, 16});
  for (std::int64_t i = 0; i < 128; ++i) g.mutable_data()[static_cast<std::size_t>(i)] = 1.0f;
  write_png(dir_ / "gt" / "x.png", g);
  write_png(dir_ / "pred" / "x.png", g);
  ASSERT_EQ(run("eval --pred " + path("pred") + " --gt " + path("gt") + " --out " + path("e.csv")), 0) << err_;
  const std::string csv = read_text(dir_ / "e.csv");
  EXPECT_EQ(csv.rfind("id,s_alpha,f_max,e_max,mae\n", 0), 0u) << csv;
  EXPECT_NE(csv.find("\nx,1"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\nmean,"), std::string::npos) << csv;
}

TEST_F(Cli, TrainThenQuality) {
  const std::string synth = std::string(DFMNET_SYNTH) + " --out " + path("data") + " --count 3 --size 32";
  ASSERT_EQ(std::system((synth + " >/dev/null").c_str()), 0);
  ASSERT_EQ(run("train --data " + path("data") + " --out " + path("t.dfmw") +
                " --steps 2 --batch 2 --no-augment --log " + path("log.csv")),
            0)
      << err_;
  EXPECT_TRUE(fs::exists(dir_ / "t.dfmw"));
  EXPECT_EQ(read_text(dir_ / "log.csv").rfind("step,lr,loss\n", 0), 0u);
  ASSERT_EQ(run("quality --pairs " + path("data") + " --shuffle --alpha-from " + path("t.dfmw") + " --out " +
                path("q.csv")),
            0)
      << err_;
  EXPECT_EQ(read_text(dir_ / "q.csv").rfind("id,c_dice,alpha_bar\n", 0), 0u);
}
