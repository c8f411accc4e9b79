// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit and acceptance tests.

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>

#include "nndecomp/harness.hpp"
#include "nndecomp/pipeline.hpp"

namespace nnd::testing {

/// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("nndecomp-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Operator labels straight from the generator.
inline FunctionLabels truth_labels(const GroundTruth& truth) {
  FunctionLabels l;
  for (const auto& f : truth.functions) l[f.func_id] = OperatorLabelVec::from_kinds(f.fused_ops);
  return l;
}

/// Decompiles with oracle labels and provenance, isolating recovery from classification.
inline DecompileResult decompile_oracle(const TraceBundle& bundle, const GroundTruth& truth,
                                        TaintPolicy taint = TaintPolicy::Auto) {
  DecompileOptions o;
  o.labels = truth_labels(truth);
  o.style = truth.provenance;
  o.taint = taint;
  o.workers = 1;
  return decompile(bundle, nullptr, o);
}

inline constexpr Style kAllStyles[] = {Style::TvmO0, Style::TvmO3, Style::Glow};

}  // namespace nnd::testing
