// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nndecomp/op_kind.hpp"
#include "nndecomp/tensor.hpp"

namespace nnd {

/// Where an operator input comes from.
struct Source {
  enum class Kind { ModelInput, Op, Param };
  Kind kind = Kind::ModelInput;
  std::string name;  // op id or param name; empty for ModelInput

  static Source model_input() { return {Kind::ModelInput, {}}; }
  static Source op(std::string id) { return {Kind::Op, std::move(id)}; }
  static Source param(std::string name) { return {Kind::Param, std::move(name)}; }

  std::string str() const;
  static Source parse(const std::string& text);
  bool operator==(const Source&) const = default;
};

struct OpSpec {
  std::string id;
  OpKind kind = OpKind::ReLU;
  std::vector<Source> inputs;
  std::map<std::string, double> attrs;
  std::map<std::string, std::string> params;  // role -> tensor name

  double attr(const std::string& key) const;
  double attr_or(const std::string& key, double fallback) const;
  std::int64_t iattr(const std::string& key) const;
  bool has_param(const std::string& role) const { return params.count(role) != 0; }

  bool operator==(const OpSpec&) const = default;
};

struct Edge {
  std::string producer;
  std::string consumer;
  std::size_t slot = 0;
  bool operator==(const Edge&) const = default;
};

/// Canonical NCHW model: ops in topological order, edges implied by op
/// inputs, parameters stored by name.
struct ModelSpec {
  Shape input_shape;
  std::vector<OpSpec> ops;
  std::map<std::string, Tensor> params;

  const OpSpec* find(const std::string& id) const;
  std::vector<Edge> edges() const;
  /// Ops whose result no other op consumes.
  std::vector<std::string> outputs() const;
  const Tensor& param(const OpSpec& op, const std::string& role) const;

  bool structurally_equal(const ModelSpec& other) const;
};

/// Checks DAG order, parameter presence/shapes, and end-to-end shape
/// propagation. Throws SchemaViolation or ShapeMismatch.
void validate(const ModelSpec& spec);

/// Output shape of every op, keyed by op id.
std::map<std::string, Shape> infer_shapes(const ModelSpec& spec);
/// Output shape of one op given the shapes of its inputs.
Shape infer_op_shape(const ModelSpec& spec, const OpSpec& op, const std::vector<Shape>& inputs);

/// Output spatial size of a conv/pool window; nullopt when not a positive integer.
std::optional<std::int64_t> window_out(std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t p);

/// Writes `model.json` plus `params/<name>.f32` raw little-endian blobs.
void save_spec(const ModelSpec& spec, const std::filesystem::path& dir);
ModelSpec load_spec(const std::filesystem::path& dir);

/// Raw little-endian f32 blob helpers shared with the parameter exporter.
void write_f32(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32(const std::filesystem::path& path);

}  // namespace nnd
