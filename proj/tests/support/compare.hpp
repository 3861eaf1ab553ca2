// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dfmnet/tensor.hpp"

namespace dfmnet::testing {

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), static_cast<std::size_t>(a.numel()) * sizeof(float)) == 0;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  }
  return worst;
}

inline float min_value(const Tensor& t) { return *std::min_element(t.data().begin(), t.data().end()); }
inline float max_value(const Tensor& t) { return *std::max_element(t.data().begin(), t.data().end()); }

}  // namespace dfmnet::testing
