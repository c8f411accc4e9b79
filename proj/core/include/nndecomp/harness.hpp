// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic code generator: lowers a ModelSpec the way the TVM and Glow
// backends would and records the resulting execution as a trace bundle
// together with its ground truth.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nndecomp/bundle.hpp"
#include "nndecomp/model.hpp"
#include "nndecomp/signatures.hpp"

namespace nnd {

struct LayoutOpt {
  enum class Kind { None, Glow5d, Tvm6d };
  Kind kind = Kind::None;
  int A = 0;
  int B = 0;

  static LayoutOpt none() { return {}; }
  static LayoutOpt glow5d(int a) { return {Kind::Glow5d, a, 0}; }
  static LayoutOpt tvm6d(int a, int b) { return {Kind::Tvm6d, a, b}; }
  std::string str() const;
  bool operator==(const LayoutOpt&) const = default;
};

struct CodegenStyle {
  Style style = Style::TvmO0;
  bool fusion = false;
  /// Tvm6d with A = B = 0 draws A and B per convolution from {8,16,32}.
  LayoutOpt layout;
  int lanes = 1;

  /// The default knob settings of each backend.
  static CodegenStyle preset(Style s);
  /// Throws InvalidArgument when the knobs contradict the style.
  void validate() const;
};

struct HarnessOptions {
  /// Reverse the kx loop of convolutions, breaking the weight-order pattern.
  bool adversarial = false;
  /// Lower convolutions through a runtime im2col Reshape (TVM styles only).
  bool reshape_conv = false;
};

struct EmittedFunction {
  FuncId func_id = 0;
  std::vector<OpKind> fused_ops;  // empty for utility functions
  Signature arg_roles;
  std::vector<std::string> source_ops;
  LayoutOpt layout;
};

struct GroundTruth {
  Style provenance = Style::TvmO0;
  std::vector<EmittedFunction> functions;
  /// Dataflow between labeled calls, as (producer, consumer) call indices.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
  /// Write history of every tensor element for the traced input: per
  /// address, (writer, value) pairs where writer is call_index + 1 and 0
  /// marks the initial state (model input and parameters).
  std::map<std::uint64_t, std::vector<std::pair<std::uint64_t, float>>> history;
  Tensor trace_input;

  const EmittedFunction* function(FuncId id) const;
  /// Value visible to the call with index `call_index`.
  std::optional<float> value_before(std::uint64_t address, std::uint64_t call_index) const;
};

/// Deterministic in (spec, style, seed, options). Throws UnsupportedOperator.
std::pair<TraceBundle, GroundTruth> emit_bundle(const ModelSpec& spec, const CodegenStyle& style, std::uint64_t seed,
                                                const HarnessOptions& options = {});

/// Writes the ground truth next to a bundle (ground_truth.json).
void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir);

struct LabeledFunction {
  AssemblyFunction function;
  std::vector<OpKind> labels;  // empty: utility
  Style provenance = Style::TvmO0;
  std::string origin;  // model name
};

struct LabeledCorpus {
  std::vector<LabeledFunction> items;
};

struct NamedSpec {
  std::string name;
  ModelSpec spec;
};

LabeledCorpus emit_corpus(const std::vector<NamedSpec>& specs, const std::vector<Style>& styles, std::uint64_t seed);
void save_corpus(const LabeledCorpus& corpus, const std::filesystem::path& file);
LabeledCorpus load_corpus(const std::filesystem::path& file);

namespace models {

/// 1x1x3x3 input, one 2x2 kernel, stride 1, no padding.
ModelSpec tiny_conv();
ModelSpec vgg_mini(std::uint64_t seed);
ModelSpec resnet_mini(std::uint64_t seed);
ModelSpec text_model(std::uint64_t seed);
ModelSpec bn_model(std::uint64_t seed);
ModelSpec inception_mini(std::uint64_t seed);
/// Single convolution, useful for layout and dimension tests.
ModelSpec single_conv(std::int64_t in_c, std::int64_t out_c, std::int64_t hw, std::int64_t k, std::int64_t s,
                      std::int64_t p, bool bias, std::uint64_t seed);
ModelSpec single_dense(std::int64_t m, std::int64_t n, bool bias, std::uint64_t seed);
/// Random small CNN drawn from the harness-supported operator set.
ModelSpec random_cnn(std::uint64_t seed);
/// Random embedding plus dense classifier.
ModelSpec random_text(std::uint64_t seed);
/// The acceptance suite models by name.
std::vector<NamedSpec> acceptance_suite(std::uint64_t seed);
/// A varied training corpus source.
std::vector<NamedSpec> corpus_suite(std::size_t count, std::uint64_t seed);

}  // namespace models

}  // namespace nnd
