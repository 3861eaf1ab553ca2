// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dfmnet/dfmw.hpp"
#include "dfmnet/error.hpp"
#include "dfmnet/image_io.hpp"
#include "dfmnet/model.hpp"
#include "dfmnet/train.hpp"
#include "support/compare.hpp"
#include "support/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace dfmnet;
using dfmnet::testing::bit_equal;
using dfmnet::testing::max_abs_diff;
using dfmnet::testing::random_tensor;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dfmnet_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string hex(const std::string& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned char c : bytes) {
    out += digits[c >> 4];
    out += digits[c & 15];
  }
  return out;
}

}  // namespace

TEST(Dfmw, RoundTripIsBitExact) {
  const DfmNet net(ModelConfig{}, 1);
  const std::vector<NamedTensor> in = named_tensors(net.weights());
  const std::vector<NamedTensor> out = decode_dfmw(encode_dfmw(in));
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].name, in[i].name);
    EXPECT_TRUE(bit_equal(out[i].tensor, in[i].tensor)) << in[i].name;
  }
}

TEST(Dfmw, EmptyModel) {
  const std::string bytes = encode_dfmw({});
  EXPECT_EQ(hex(bytes), "44464d57" "0100" "00000000");
  EXPECT_TRUE(decode_dfmw(bytes).empty());
}

TEST(Dfmw, LittleEndianLayout) {
  const std::string bytes = encode_dfmw({{"a", Tensor::from({1, 2}, {1.0f, -2.0f})}});
  EXPECT_EQ(hex(bytes),
            "44464d57" "0100" "01000000"         // magic, version, count
            "0100" "61" "02"                     // name, ndim
            "0100000000000000" "0200000000000000"  // dims
            "00" "0000803f" "000000c0");         // dtype, payload
}

TEST(Dfmw, SpecialValuesSurvive) {
  const Tensor t = Tensor::from({4}, {-0.0f, INFINITY, std::nanf(""), 1e-45f});
  EXPECT_TRUE(bit_equal(decode_dfmw(encode_dfmw({{"x", t}}))[0].tensor, t));
}

TEST(Dfmw, CorruptFiles) {
  const std::string good = encode_dfmw({{"w", Tensor::from({3}, {1.0f, 2.0f, 3.0f})}});
  for (std::size_t cut = 0; cut < good.size(); ++cut) {
    EXPECT_THROW(decode_dfmw(good.substr(0, cut)), CorruptFile) << "cut at " << cut;
  }
  EXPECT_THROW(decode_dfmw(good + "x"), CorruptFile);
  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(decode_dfmw(magic), CorruptFile);
  std::string version = good;
  version[4] = 2;
  EXPECT_THROW(decode_dfmw(version), UnknownVersion);
  std::string dtype = good;
  dtype[good.size() - 13] = 1;
  EXPECT_THROW(decode_dfmw(dtype), CorruptFile);
}

TEST(Dfmw, DuplicateNames) {
  const NamedTensor a{"same", Tensor::zeros({1})};
  EXPECT_THROW(encode_dfmw({a, a}), DuplicateName);
  std::string one = encode_dfmw({a});
  std::string two = one.substr(0, 10) + one.substr(10) + one.substr(10);
  two[6] = 2;
  EXPECT_THROW(decode_dfmw(two), DuplicateName);
}

TEST_F(TempDir, WeightFilesAndMissingPath) {
  const DfmNet net(ModelConfig{}, 2);
  save_weights(dir_ / "w.dfmw", net.weights());
  EXPECT_EQ(static_cast<std::int64_t>(fs::file_size(dir_ / "w.dfmw")),
            static_cast<std::int64_t>(encode_dfmw(named_tensors(net.weights())).size()));
  DfmNet other(ModelConfig{}, 3);
  other.load(load_weights(dir_ / "w.dfmw"));
  for (std::size_t i = 0; i < net.weights().size(); ++i) {
    EXPECT_TRUE(bit_equal(net.weights().entries()[i].tensor, other.weights().entries()[i].tensor));
  }
  EXPECT_THROW(load_weights(dir_ / "absent.dfmw"), MissingFile);
}

TEST_F(TempDir, PngQuantizationError) {
  Rng rng(1);
  const Tensor s = random_tensor(rng, {1, 40, 30}, 0.0, 1.0);
  write_png(dir_ / "s.png", s);
  const Image img = read_image(dir_ / "s.png");
  EXPECT_EQ(img.width, 30);
  EXPECT_EQ(img.height, 40);
  EXPECT_EQ(img.channels, 1);
  EXPECT_EQ(img.max_value, 255u);
  EXPECT_LE(max_abs_diff(image_to_tensor(img, 1), s), 0.5f / 255.0f + 1e-6f);
  EXPECT_EQ(classify_aux(img), AuxKind::kDepth8);
}

TEST_F(TempDir, SixteenBitDepthAndRgb) {
  Rng rng(2);
  const Tensor d = random_tensor(rng, {1, 8, 8}, 0.0, 1.0);
  write_png(dir_ / "d.png", d, 16);
  const Image img = read_image(dir_ / "d.png");
  EXPECT_EQ(img.max_value, 65535u);
  EXPECT_EQ(classify_aux(img), AuxKind::kDepth16);
  EXPECT_LE(max_abs_diff(image_to_tensor(img, 1), d), 0.5f / 65535.0f + 1e-6f);

  const Tensor c = random_tensor(rng, {3, 8, 8}, 0.0, 1.0);
  write_png(dir_ / "c.png", c);
  const Image rgb = read_image(dir_ / "c.png");
  EXPECT_EQ(rgb.channels, 3);
  EXPECT_EQ(classify_aux(rgb), AuxKind::kFlowRgb);
  EXPECT_EQ(image_to_tensor(rgb, 3).shape(), (Shape{3, 8, 8}));
  EXPECT_THROW(write_png(dir_ / "x.png", d, 12), InvalidConfig);
}

TEST_F(TempDir, NetpbmFormats) {
  write_bytes(dir_ / "g.pgm", std::string("P5\n# comment\n2 1\n255\n") + '\x00' + '\xff');
  const Image g = read_image(dir_ / "g.pgm");
  EXPECT_EQ(g.channels, 1);
  EXPECT_EQ(image_to_tensor(g, 1).data()[1], 1.0f);

  write_bytes(dir_ / "w.pgm", std::string("P5 1 1 65535 ") + '\x80' + '\x00');
  EXPECT_EQ(read_image(dir_ / "w.pgm").samples[0], 0x8000);

  write_bytes(dir_ / "c.ppm", std::string("P6 1 1 255\n") + '\x10' + '\x20' + '\x30');
  EXPECT_EQ(read_image(dir_ / "c.ppm").channels, 3);

  write_bytes(dir_ / "short.pgm", "P5 4 4 255\n\x01");
  EXPECT_THROW(read_image(dir_ / "short.pgm"), DecodeError);
  write_bytes(dir_ / "junk.png", "not an image");
  EXPECT_THROW(read_image(dir_ / "junk.png"), DecodeError);
  EXPECT_THROW(read_image(dir_ / "nope.png"), MissingFile);
}

TEST_F(TempDir, LoadSampleNormalizesResizesAndBinarizes) {
  for (const char* sub : {"RGB", "depth", "GT"}) fs::create_directories(dir_ / sub);
  write_png(dir_ / "RGB" / "a.png", Tensor::full({3, 512, 512}, 0.5f));
  write_png(dir_ / "depth" / "a.png", Tensor::ones({1, 512, 512}));
  write_png(dir_ / "GT" / "a.png", Tensor::full({1, 512, 512}, 200.0f / 255.0f));
  const DatasetManifest m = scan_dataset(dir_, InputMode::kRgbd);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].id, "a");
  const Sample s = load_sample(m.entries[0], InputMode::kRgbd);
  EXPECT_EQ(s.rgb.shape(), (Shape{3, 256, 256}));
  EXPECT_EQ(s.aux.shape(), (Shape{1, 256, 256}));
  EXPECT_EQ(s.gt.shape(), (Shape{1, 256, 256}));
  for (float v : s.aux.data()) ASSERT_EQ(v, 1.0f);
  for (float v : s.gt.data()) ASSERT_EQ(v, 1.0f);
  EXPECT_THROW(scan_dataset(dir_, InputMode::kFlow3), MissingFile);
}

TEST_F(TempDir, ScanDatasetErrors) {
  EXPECT_THROW(scan_dataset(dir_ / "none", InputMode::kRgbd), MissingFile);
  for (const char* sub : {"RGB", "depth"}) fs::create_directories(dir_ / sub);
  EXPECT_THROW(scan_dataset(dir_, InputMode::kRgbd, false), EmptyDataset);
  EXPECT_THROW(scan_dataset(dir_, InputMode::kRgbd, true), MissingFile);
  write_png(dir_ / "RGB" / "a.png", Tensor::zeros({3, 8, 8}));
  EXPECT_THROW(scan_dataset(dir_, InputMode::kRgbd, false), MissingFile);
  write_png(dir_ / "depth" / "a.png", Tensor::zeros({1, 8, 8}));
  const DatasetManifest m = scan_dataset(dir_, InputMode::kRgbd, false);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_TRUE(m.entries[0].gt.empty());
  EXPECT_EQ(load_sample(m.entries[0], InputMode::kRgbd, 32).gt.shape(), (Shape{1, 32, 32}));
}

TEST(ResizeImage, ConstantAndExtents) {
  const Tensor r = resize_image(Tensor::full({2, 10, 6}, 0.25f), 5, 12);
  EXPECT_EQ(r.shape(), (Shape{2, 5, 12}));
  for (float v : r.data()) EXPECT_FLOAT_EQ(v, 0.25f);
}
