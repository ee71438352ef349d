// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mixattn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or semantically invalid configuration document.
class ConfigError : public Error {
 public:
  enum class Code {
    kSyntax,
    kUnknownField,
    kMissingField,
    kUnknownEnum,
    kBadType,
    kSelfReference,
    kUnknownPreset,
    kInvalid,
  };

  ConfigError(Code code, const std::string& what) : Error(what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

/// Violated precondition of an engine or cache operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace mixattn
