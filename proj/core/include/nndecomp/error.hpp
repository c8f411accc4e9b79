// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nnd {

enum class ErrorCode {
  // bundle / model I/O
  MissingFile,
  SchemaViolation,
  DanglingFuncId,
  IoError,
  TensorSizeMismatch,
  ShapeMismatch,
  // harness
  UnsupportedOperator,
  // operator-id
  InsufficientLabels,
  // topology
  MissingSignature,
  CycleDetected,
  // taint / symexec
  EmptyTrace,
  UnmodeledOpcode,
  UnresolvedCell,
  FragmentedRegion,
  // recover
  NonIntegerDim,
  DegenerateOutput,
  ZeroMuls,
  IdenticalConstraints,
  NoContiguousRun,
  MissingRole,
  LayoutUnrecognized,
  RegionOutOfSnapshot,
  SizeMismatch,
  // misc
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `what()` is prefixed with the error code name so
/// CLI diagnostics stay greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

std::string hex(std::uint64_t value);

}  // namespace nnd
