// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dfmnet {

/// Base of every error the library throws. `kind()` names the failure class
/// (e.g. "ShapeMismatch") so callers and the CLI can report it uniformly.
class Error : public std::runtime_error {
 public:
  Error(const char* kind, const std::string& what)
      : std::runtime_error(std::string(kind) + ": " + what), kind_(kind) {}
  const char* kind() const noexcept { return kind_; }

 private:
  const char* kind_;
};

#define DFMNET_DEFINE_ERROR(Name)                                        \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(#Name, what) {}       \
  }

DFMNET_DEFINE_ERROR(ShapeMismatch);
DFMNET_DEFINE_ERROR(NumericalError);
DFMNET_DEFINE_ERROR(InvalidConfig);
DFMNET_DEFINE_ERROR(EmptyTape);
DFMNET_DEFINE_ERROR(ModeMismatch);
DFMNET_DEFINE_ERROR(EmptyDataset);
DFMNET_DEFINE_ERROR(EmptySet);
DFMNET_DEFINE_ERROR(CorruptFile);
DFMNET_DEFINE_ERROR(UnknownVersion);
DFMNET_DEFINE_ERROR(DuplicateName);
DFMNET_DEFINE_ERROR(DecodeError);
DFMNET_DEFINE_ERROR(MissingFile);

#undef DFMNET_DEFINE_ERROR

}  // namespace dfmnet
