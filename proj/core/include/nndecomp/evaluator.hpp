// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nndecomp/model.hpp"

namespace nnd {

/// Reference forward pass. Accumulation runs in f32 in a fixed left-to-right
/// order so repeated runs are bit-identical.
Tensor forward(const ModelSpec& spec, const Tensor& input);

/// Like forward() but returns every op's output, keyed by op id.
std::map<std::string, Tensor> forward_all(const ModelSpec& spec, const Tensor& input);

/// Random inputs for `spec`. Models whose input feeds an Embedding receive
/// valid integer token ids; everything else is uniform in [-1, 1].
std::vector<Tensor> random_inputs(const ModelSpec& spec, std::size_t count, std::uint64_t seed);

struct InputComparison {
  bool labels_match = false;
  double max_abs_diff = 0.0;
};

struct EquivalenceReport {
  std::vector<InputComparison> per_input;
  double tolerance = 1e-4;
  bool pass = false;

  double worst_diff() const;
  std::string summary() const;
};

inline constexpr double kDefaultTolerance = 1e-4;

/// Compares the concatenated outputs of two models over `inputs`. The
/// argmax label must match exactly and every value within `tol`.
EquivalenceReport compare(const ModelSpec& a, const ModelSpec& b, const std::vector<Tensor>& inputs,
                          double tol = kDefaultTolerance);

}  // namespace nnd
