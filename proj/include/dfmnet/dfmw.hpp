// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfmnet/nn.hpp"
#include "dfmnet/tensor.hpp"

namespace dfmnet {

/// Named-tensor weight file.
///
///   "DFMW" | u16 version | u32 count | count x entry
///   entry: u16 name_len | name (utf-8) | u8 ndim | ndim x u64 dim | u8 dtype (0 = f32) | f32 payload
///
/// All integers and floats are little-endian regardless of the host.
inline constexpr std::uint16_t kDfmwVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Serialized form. Throws DuplicateName on repeated names.
std::string encode_dfmw(const std::vector<NamedTensor>& entries);
/// Throws CorruptFile on bad magic, truncation, bad dtype or trailing bytes,
/// UnknownVersion on a version other than kDfmwVersion, DuplicateName on
/// repeated names.
std::vector<NamedTensor> decode_dfmw(const std::string& bytes);

void save_weights(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
void save_weights(const std::filesystem::path& path, const ParamStore& store);
/// Throws MissingFile when the file cannot be opened.
std::vector<NamedTensor> load_weights(const std::filesystem::path& path);

std::vector<NamedTensor> named_tensors(const ParamStore& store);

/// Bytes of f32 payload (4 x element count) across all entries.
std::int64_t payload_bytes(const std::vector<NamedTensor>& entries);

}  // namespace dfmnet
