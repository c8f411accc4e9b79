// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/topology.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <queue>
#include <set>

#include "nndecomp/error.hpp"

namespace nnd {

using nlohmann::json;

const GraphNode* CompGraph::node(std::uint64_t call_index) const {
  for (const auto& n : nodes)
    if (n.call_index == call_index) return &n;
  return nullptr;
}

std::vector<GraphEdge> CompGraph::inputs_of(std::uint64_t call_index) const {
  std::vector<GraphEdge> out;
  for (const auto& e : edges)
    if (e.consumer == call_index) out.push_back(e);
  return out;
}

std::vector<GraphEdge> CompGraph::outputs_of(std::uint64_t call_index) const {
  std::vector<GraphEdge> out;
  for (const auto& e : edges)
    if (e.producer == call_index) out.push_back(e);
  return out;
}

std::vector<std::uint64_t> CompGraph::topological_order() const {
  std::map<std::uint64_t, std::size_t> indegree;
  std::map<std::uint64_t, std::vector<std::uint64_t>> succ;
  for (const auto& n : nodes) indegree[n.call_index];
  for (const auto& e : edges) {
    if (!indegree.count(e.producer) || !indegree.count(e.consumer))
      fail(ErrorCode::SchemaViolation, "edge refers to a missing node");
    ++indegree[e.consumer];
    succ[e.producer].push_back(e.consumer);
  }
  std::priority_queue<std::uint64_t, std::vector<std::uint64_t>, std::greater<>> ready;
  for (const auto& [c, d] : indegree)
    if (d == 0) ready.push(c);
  std::vector<std::uint64_t> order;
  while (!ready.empty()) {
    const auto c = ready.top();
    ready.pop();
    order.push_back(c);
    for (auto s : succ[c])
      if (--indegree[s] == 0) ready.push(s);
  }
  if (order.size() != indegree.size()) fail(ErrorCode::CycleDetected, "computation graph has a cycle");
  return order;
}

const Signature& callsite_signature(const CallsiteRecord& call, const OperatorLabelVec& labels,
                                    const SignatureConfig& signatures, Style style) {
  const auto kinds = labels.kinds();
  if (kinds.empty())
    fail(ErrorCode::MissingSignature, "function " + std::to_string(call.func_id) + " has no operator label");
  return signatures.lookup(style, kinds.front(), call.args.size());
}

CompGraph recover_topology(const TraceBundle& bundle, const FunctionLabels& labels, const SignatureConfig& signatures,
                           Style style) {
  CompGraph g;
  std::map<std::uint64_t, std::uint64_t> last_writer;  // address -> call index
  for (const auto& call : bundle.callsites) {
    auto it = labels.find(call.func_id);
    if (it == labels.end())
      fail(ErrorCode::MissingSignature, "callsite " + std::to_string(call.call_index) + " of function " +
                                            std::to_string(call.func_id) + " has no label");
    if (it->second.is_utility()) continue;
    const Signature& sig = callsite_signature(call, it->second, signatures, style);
    g.nodes.push_back({call.call_index, call.func_id, it->second});

    std::set<std::uint64_t> seen;
    for (std::size_t a = 0; a < sig.size(); ++a) {
      if (!sig[a].is_input() || !seen.insert(call.args[a]).second) continue;
      auto w = last_writer.find(call.args[a]);
      if (w == last_writer.end()) continue;
      if (w->second >= call.call_index)
        fail(ErrorCode::CycleDetected, "callsite " + std::to_string(call.call_index) + " reads a pointer written later");
      g.edges.push_back({w->second, call.call_index, call.args[a]});
    }
    for (std::size_t a = 0; a < sig.size(); ++a)
      if (sig[a].is_output()) last_writer[call.args[a]] = call.call_index;
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.topological_order();
  return g;
}

namespace {

json labels_json(const OperatorLabelVec& v) {
  json kinds = json::array(), conf = json::object();
  for (OpKind k : v.kinds()) kinds.push_back(std::string(kind_name(k)));
  for (std::size_t i = 0; i < kNumLabels; ++i)
    if (v.confidences[i] > 0) conf[std::string(kind_name(label_registry()[i]))] = v.confidences[i];
  return {{"labels", kinds}, {"confidences", conf}, {"needs_review", v.needs_review()}};
}

OperatorLabelVec labels_from_json(const json& j) {
  OperatorLabelVec v;
  for (const auto& name : j.at("labels")) {
    auto k = parse_kind(name.get<std::string>());
    if (!k || !label_index(*k)) fail(ErrorCode::SchemaViolation, "unknown label " + name.dump());
    v.set(*k, true);
  }
  if (j.contains("confidences"))
    for (const auto& [name, c] : j.at("confidences").items()) {
      auto k = parse_kind(name);
      if (!k || !label_index(*k)) fail(ErrorCode::SchemaViolation, "unknown label " + name);
      v.confidences[*label_index(*k)] = c.get<double>();
    }
  return v;
}

json load_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::MissingFile, "cannot read " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, file.string() + ": " + e.what());
  }
}

void store_json(const json& j, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void write_graph(const CompGraph& graph, const std::filesystem::path& file) {
  json nodes = json::array(), edges = json::array();
  for (const auto& n : graph.nodes) {
    json j = labels_json(n.labels);
    j["call_index"] = n.call_index;
    j["func_id"] = n.func_id;
    nodes.push_back(j);
  }
  for (const auto& e : graph.edges)
    edges.push_back({{"producer", e.producer}, {"consumer", e.consumer}, {"via_address", e.via_address}});
  store_json({{"nodes", nodes}, {"edges", edges}}, file);
}

CompGraph read_graph(const std::filesystem::path& file) {
  const json j = load_json(file);
  CompGraph g;
  try {
    for (const auto& n : j.at("nodes"))
      g.nodes.push_back({n.at("call_index").get<std::uint64_t>(), n.at("func_id").get<FuncId>(), labels_from_json(n)});
    for (const auto& e : j.at("edges"))
      g.edges.push_back({e.at("producer").get<std::uint64_t>(), e.at("consumer").get<std::uint64_t>(),
                         e.at("via_address").get<std::uint64_t>()});
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, file.string() + ": " + e.what());
  }
  return g;
}

void write_labels(const FunctionLabels& labels, const std::filesystem::path& file) {
  json arr = json::array();
  for (const auto& [id, v] : labels) {
    json j = labels_json(v);
    j["func_id"] = id;
    arr.push_back(j);
  }
  store_json({{"functions", arr}}, file);
}

FunctionLabels read_labels(const std::filesystem::path& file) {
  const json j = load_json(file);
  FunctionLabels out;
  try {
    for (const auto& f : j.at("functions")) out[f.at("func_id").get<FuncId>()] = labels_from_json(f);
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, file.string() + ": " + e.what());
  }
  return out;
}

}  // namespace nnd
