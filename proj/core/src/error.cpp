// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/error.hpp"

#include <cstdio>

namespace nnd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DanglingFuncId: return "DanglingFuncId";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TensorSizeMismatch: return "TensorSizeMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnsupportedOperator: return "UnsupportedOperator";
    case ErrorCode::InsufficientLabels: return "InsufficientLabels";
    case ErrorCode::MissingSignature: return "MissingSignature";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::UnmodeledOpcode: return "UnmodeledOpcode";
    case ErrorCode::UnresolvedCell: return "UnresolvedCell";
    case ErrorCode::FragmentedRegion: return "FragmentedRegion";
    case ErrorCode::NonIntegerDim: return "NonIntegerDim";
    case ErrorCode::DegenerateOutput: return "DegenerateOutput";
    case ErrorCode::ZeroMuls: return "ZeroMuls";
    case ErrorCode::IdenticalConstraints: return "IdenticalConstraints";
    case ErrorCode::NoContiguousRun: return "NoContiguousRun";
    case ErrorCode::MissingRole: return "MissingRole";
    case ErrorCode::LayoutUnrecognized: return "LayoutUnrecognized";
    case ErrorCode::RegionOutOfSnapshot: return "RegionOutOfSnapshot";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

std::string hex(std::uint64_t value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace nnd
