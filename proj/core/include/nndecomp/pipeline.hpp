// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end decompilation: classify, predict provenance, recover the graph,
// analyse every operator, assemble and check the model, export artifacts.

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nndecomp/classifier.hpp"
#include "nndecomp/recover.hpp"
#include "nndecomp/rules.hpp"
#include "nndecomp/topology.hpp"

namespace nnd {

struct DecompileOptions {
  TaintPolicy taint = TaintPolicy::Auto;
  std::size_t workers = 0;                // 0: NNDECOMP_WORKERS, else hardware concurrency
  std::optional<Style> style;             // skips provenance prediction
  std::optional<FunctionLabels> labels;   // skips operator classification
  /// Receives (stage, milliseconds) after each stage.
  std::function<void(const std::string&, double)> on_stage;
};

struct DecompileResult {
  Style style = Style::TvmO0;
  FunctionLabels labels;
  CompGraph graph;
  std::vector<RecoveredOp> ops;  // call order
  DraftModel draft;
  int passes = 0;  // recovery rounds, more than one after a relabelling rule fired

  bool needs_review() const;
  int exit_code() const { return needs_review() ? 2 : 0; }
};

/// Worker count from NNDECOMP_WORKERS, falling back to the hardware.
std::size_t default_workers();

/// Builds a draft model from recovered operators in call order.
DraftModel assemble_draft(const CompGraph& graph, const std::vector<RecoveredOp>& ops);

DecompileResult decompile(const TraceBundle& bundle, const Classifier* classifier, const DecompileOptions& options = {});

/// Writes model.json, params/, constraints/*.txt, labels.json, graph.json,
/// findings.json and report.md.
void export_result(const DecompileResult& result, const TraceBundle& bundle, const std::filesystem::path& out_dir);

std::string render_report(const DecompileResult& result, const TraceBundle& bundle);

}  // namespace nnd
