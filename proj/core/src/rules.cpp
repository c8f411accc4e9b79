// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/rules.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace nnd {

using nlohmann::json;

namespace {

bool integral(double v) { return std::isfinite(v) && v == std::floor(v); }

std::optional<std::vector<Shape>> input_shapes(const ModelSpec& spec, const OpSpec& op,
                                               const std::map<std::string, Shape>& shapes) {
  std::vector<Shape> in;
  for (const auto& s : op.inputs) {
    switch (s.kind) {
      case Source::Kind::ModelInput:
        if (spec.input_shape.empty()) return std::nullopt;
        in.push_back(spec.input_shape);
        break;
      case Source::Kind::Op: {
        auto it = shapes.find(s.name);
        if (it == shapes.end()) return std::nullopt;
        in.push_back(it->second);
        break;
      }
      case Source::Kind::Param: {
        auto it = spec.params.find(s.name);
        if (it == spec.params.end()) return std::nullopt;
        in.push_back(it->second.shape());
        break;
      }
    }
  }
  return in;
}

std::optional<std::string> shape_error(const ModelSpec& spec, const OpSpec& op, const std::vector<Shape>& in) {
  try {
    infer_op_shape(spec, op, in);
    return std::nullopt;
  } catch (const Error& e) {
    return std::string(e.what());
  }
}

void rewire(ModelSpec& spec, const std::string& from, const Source& to) {
  for (auto& op : spec.ops)
    for (auto& s : op.inputs)
      if (s == Source::op(from)) s = to;
}

bool has_finding(const std::vector<Finding>& fs, const Finding& f) { return std::find(fs.begin(), fs.end(), f) != fs.end(); }

class RuleEngine {
 public:
  explicit RuleEngine(DraftModel& d) : d_(d) {}

  bool fix_pass() {
    bool changed = false;
    changed |= rule1();
    changed |= rule2();
    changed |= rule3();
    changed |= rule4();
    return changed;
  }

  void review() {
    rule5();
    rule6();
  }

 private:
  const OpEvidence* ev(const std::string& id) const {
    auto it = d_.evidence.find(id);
    return it == d_.evidence.end() ? nullptr : &it->second;
  }

  Finding finding(int rule, const std::string& op_id, const std::string& subtype, const std::string& what) const {
    Finding f;
    f.rule_id = rule;
    f.op_id = op_id;
    f.subtype = subtype;
    f.description = what;
    if (const OpEvidence* e = ev(op_id)) {
      f.func_id = e->func_id;
      f.call_index = e->call_index;
    }
    return f;
  }

  void record_fix(Finding f) {
    f.fix_applied = true;
    if (!has_finding(d_.findings, f)) d_.findings.push_back(std::move(f));
  }

  bool conv_broken(const OpSpec& op, const std::map<std::string, Shape>& shapes) const {
    for (const char* k : {"K", "S", "P", "O_C", "I_C"}) {
      auto it = op.attrs.find(k);
      if (it == op.attrs.end() || !integral(it->second) || it->second < (std::string(k) == "P" ? 0 : 1)) return true;
    }
    auto in = input_shapes(d_.spec, op, shapes);
    return in && shape_error(d_.spec, op, *in).has_value();
  }

  bool rule1() {
    bool changed = false;
    for (std::size_t i = 0; i < d_.spec.ops.size(); ++i) {
      const auto shapes = partial_shapes(d_.spec);
      OpSpec& op = d_.spec.ops[i];
      if (op.kind != OpKind::Conv || !conv_broken(op, shapes)) continue;
      const OpEvidence* e = ev(op.id);
      auto in = input_shapes(d_.spec, op, shapes);
      if (!e || !in || in->size() != 1 || e->mul_count == 0) continue;
      const auto n = static_cast<std::uint64_t>(e->mul_count);
      if (e->M_w % (kElemBytes * n) != 0) continue;
      const auto oc = static_cast<std::int64_t>(e->M_w / (kElemBytes * n));
      const auto plane = e->M_o / (kElemBytes * static_cast<std::uint64_t>(oc));
      const auto oh = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(plane))));
      if (oh * oh != static_cast<std::int64_t>(plane)) continue;
      ConvDims fixed;
      try {
        fixed = repair_conv_dims(in->front(), {1, oc, oh, oh}, static_cast<std::int64_t>(n));
      } catch (const Error&) {
        continue;
      }
      const std::string before = describe_op(d_.spec, op);
      const std::map<std::string, double> old_attrs = op.attrs;
      op.attrs["K"] = static_cast<double>(fixed.K);
      op.attrs["S"] = static_cast<double>(fixed.S);
      op.attrs["P"] = static_cast<double>(fixed.P);
      op.attrs["O_C"] = static_cast<double>(fixed.O_C);
      op.attrs["I_C"] = static_cast<double>(fixed.I_C);
      reshape_param(op, "weights", fixed.weight_shape());
      reshape_param(op, "bias", {fixed.O_C});
      if (op.attrs == old_attrs && describe_op(d_.spec, op) == before) continue;
      Finding f = finding(1, op.id, "conv-dims", "convolution dimensions are not integral or do not fit the input; "
                                                 "rebuilt from neighbouring shapes and the multiplication count");
      f.before = before;
      f.after = describe_op(d_.spec, op);
      record_fix(std::move(f));
      changed = true;
    }
    return changed;
  }

  void reshape_param(const OpSpec& op, const std::string& role, const Shape& shape) {
    auto it = op.params.find(role);
    if (it == op.params.end()) return;
    Tensor& t = d_.spec.params.at(it->second);
    if (t.numel() == numel(shape) && t.shape() != shape) t = Tensor(shape, t.values());
  }

  bool rule2() {
    bool changed = false;
    for (auto& op : d_.spec.ops) {
      if (op.kind != OpKind::Add || op.inputs.size() != 2) continue;
      const bool p0 = op.inputs[0].kind == Source::Kind::Param, p1 = op.inputs[1].kind == Source::Kind::Param;
      if (p0 == p1) continue;
      const std::string before = describe_op(d_.spec, op);
      const Source act = p0 ? op.inputs[1] : op.inputs[0];
      op.params["bias"] = (p0 ? op.inputs[0] : op.inputs[1]).name;
      op.kind = OpKind::BiasAdd;
      op.inputs = {act};
      Finding f = finding(2, op.id, "add-to-biasadd", "addition with a constant operand is a bias addition");
      f.before = before;
      f.after = describe_op(d_.spec, op);
      record_fix(std::move(f));
      changed = true;
    }
    return changed;
  }

  bool rule3() {
    bool changed = false;
    const auto shapes = partial_shapes(d_.spec);
    for (const auto& op : d_.spec.ops) {
      if (op.kind != OpKind::Split) continue;
      const OpEvidence* e = ev(op.id);
      auto in = input_shapes(d_.spec, op, shapes);
      if (!e || !in || in->empty()) continue;
      const auto in_bytes = static_cast<std::uint64_t>(numel(in->front())) * kElemBytes;
      if (e->written_bytes < in_bytes) continue;
      OperatorLabelVec l = e->labels;
      l.set(OpKind::Split, false);
      l.set(OpKind::Concat, true);
      if (d_.relabel.count(e->func_id) && d_.relabel.at(e->func_id) == l) continue;
      d_.relabel[e->func_id] = l;
      Finding f = finding(3, op.id, "split-to-concat",
                          "output region (" + std::to_string(e->written_bytes) + " bytes) is not smaller than the input (" +
                              std::to_string(in_bytes) + " bytes); relabelled as Concat");
      f.before = "Split";
      f.after = "Concat";
      record_fix(std::move(f));
      changed = true;
    }
    return changed;
  }

  bool rule4() {
    bool changed = false;
    for (std::size_t i = 0; i < d_.spec.ops.size(); ++i) {
      const OpSpec op = d_.spec.ops[i];
      const OpEvidence* e = ev(op.id);
      if (!e) continue;
      if (e->is_activation && op.kind == OpKind::ReLU && !e->has_max) {
        rewire(d_.spec, op.id, op.inputs.at(0));
        d_.spec.ops.erase(d_.spec.ops.begin() + static_cast<std::ptrdiff_t>(i));
        Finding f = finding(4, op.id, "relu-removed", "fused ReLU label without a max in the constraint");
        f.before = "ReLU";
        f.after = "removed";
        record_fix(std::move(f));
        d_.evidence.erase(op.id);
        changed = true;
        --i;
        continue;
      }
      const bool linear = e->anchor == OpKind::Conv || e->anchor == OpKind::Dense || e->anchor == OpKind::Add ||
                          e->anchor == OpKind::BiasAdd;
      if (e->is_activation || !linear || !e->has_max || has_activation(e->call_index)) continue;
      OpSpec relu;
      relu.id = "n" + std::to_string(e->call_index) + "_relu";
      relu.kind = OpKind::ReLU;
      relu.inputs = {Source::op(op.id)};
      rewire(d_.spec, op.id, Source::op(relu.id));
      d_.spec.ops.insert(d_.spec.ops.begin() + static_cast<std::ptrdiff_t>(i) + 1, relu);
      OpEvidence re = *e;
      re.is_activation = true;
      d_.evidence[relu.id] = re;
      Finding f = finding(4, op.id, "relu-added", "constraint contains a max but the ReLU label is missing");
      f.before = std::string(kind_name(op.kind));
      f.after = std::string(kind_name(op.kind)) + "+ReLU";
      record_fix(std::move(f));
      changed = true;
      ++i;
    }
    return changed;
  }

  bool has_activation(std::uint64_t call_index) const {
    for (const auto& op : d_.spec.ops)
      if (const OpEvidence* e = ev(op.id); e && e->call_index == call_index && e->is_activation) return true;
    return false;
  }

  void rule5() {
    std::set<std::uint64_t> fixed, seen;
    for (const auto& f : d_.findings)
      if (f.rule_id >= 2 && f.rule_id <= 4) fixed.insert(f.call_index);
    for (const auto& op : d_.spec.ops) {
      const OpEvidence* e = ev(op.id);
      if (!e || e->is_activation || !seen.insert(e->call_index).second) continue;
      if (!e->labels.needs_review() || fixed.count(e->call_index)) continue;
      d_.findings.push_back(finding(5, op.id, "low-confidence",
                                    "operator label " + e->labels.str() + " predicted below the confidence threshold"));
    }
  }

  void rule6() {
    std::set<std::string> repaired;
    for (const auto& f : d_.findings)
      if (f.rule_id == 1) repaired.insert(f.op_id);
    for (const auto& op : d_.spec.ops) {
      const OpEvidence* e = ev(op.id);
      if (!e || e->is_activation) continue;
      if (e->error && !(repaired.count(op.id) && *e->error == ErrorCode::NonIntegerDim))
        d_.findings.push_back(finding(6, op.id, std::string(to_string(*e->error)), e->error_message));
      if (e->degenerate)
        d_.findings.push_back(finding(6, op.id, "degenerate-stride", "a single output column leaves the stride unknown; 1 assumed"));
    }
    std::map<std::string, Shape> shapes;
    for (const auto& op : d_.spec.ops) {
      auto in = input_shapes(d_.spec, op, shapes);
      if (!in) continue;
      try {
        shapes[op.id] = infer_op_shape(d_.spec, op, *in);
      } catch (const Error& err) {
        d_.findings.push_back(finding(6, op.id, "shape-mismatch", err.what()));
      }
    }
  }

  DraftModel& d_;
};

}  // namespace

std::map<std::string, Shape> partial_shapes(const ModelSpec& spec) {
  std::map<std::string, Shape> shapes;
  for (const auto& op : spec.ops) {
    auto in = input_shapes(spec, op, shapes);
    if (!in) continue;
    try {
      shapes[op.id] = infer_op_shape(spec, op, *in);
    } catch (const Error&) {
    }
  }
  return shapes;
}

ConvDims repair_conv_dims(const Shape& in, const Shape& out, std::int64_t n) {
  if (in.size() != 4 || out.size() != 4 || in[2] != in[3] || out[2] != out[3])
    fail(ErrorCode::NonIntegerDim, "convolution neighbours are not square NCHW tensors");
  ConvDims d;
  d.I_C = in[1];
  d.IH = in[2];
  d.O_C = out[1];
  d.OH = out[2];
  if (d.I_C <= 0 || n % d.I_C != 0) fail(ErrorCode::NonIntegerDim, "multiplications are not a multiple of I_C");
  const std::int64_t q = n / d.I_C;
  d.K = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(q))));
  if (d.K * d.K != q) fail(ErrorCode::NonIntegerDim, "kernel size sqrt(" + std::to_string(q) + ") is not an integer");
  for (d.S = 1; d.S <= std::max<std::int64_t>(d.IH, 1); ++d.S)
    for (d.P = 0; d.P < d.K; ++d.P)
      if (d.consistent()) return d;
  fail(ErrorCode::NonIntegerDim, "no stride and padding map " + shape_str(in) + " to " + shape_str(out));
}

std::string describe_op(const ModelSpec& spec, const OpSpec& op) {
  std::ostringstream s;
  s << kind_name(op.kind);
  for (const auto& [k, v] : op.attrs) s << ' ' << k << '=' << v;
  for (const auto& [role, name] : op.params) {
    auto it = spec.params.find(name);
    s << ' ' << role << shape_str(it == spec.params.end() ? Shape{} : it->second.shape());
  }
  return s.str();
}

DraftModel apply_rules(DraftModel draft) {
  std::erase_if(draft.findings, [](const Finding& f) { return !f.fix_applied; });
  RuleEngine engine(draft);
  for (int pass = 0; pass < kMaxRulePasses; ++pass)
    if (!engine.fix_pass()) break;
  engine.review();
  return draft;
}

void write_findings(const std::vector<Finding>& findings, const std::filesystem::path& file) {
  json arr = json::array();
  for (const auto& f : findings)
    arr.push_back({{"rule_id", f.rule_id},
                   {"func_id", f.func_id},
                   {"call_index", f.call_index},
                   {"op_id", f.op_id},
                   {"subtype", f.subtype},
                   {"description", f.description},
                   {"fix_applied", f.fix_applied},
                   {"needs_review", f.needs_review()},
                   {"before", f.before},
                   {"after", f.after}});
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  out << json{{"findings", arr}}.dump(2) << '\n';
}

std::vector<Finding> read_findings(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::MissingFile, "cannot read " + file.string());
  std::vector<Finding> out;
  try {
    const json j = json::parse(in);
    for (const auto& o : j.at("findings")) {
      Finding f;
      f.rule_id = o.at("rule_id").get<int>();
      f.func_id = o.at("func_id").get<FuncId>();
      f.call_index = o.at("call_index").get<std::uint64_t>();
      f.op_id = o.at("op_id").get<std::string>();
      f.subtype = o.at("subtype").get<std::string>();
      f.description = o.at("description").get<std::string>();
      f.fix_applied = o.at("fix_applied").get<bool>();
      f.before = o.at("before").get<std::string>();
      f.after = o.at("after").get<std::string>();
      out.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, file.string() + ": " + e.what());
  }
  return out;
}

}  // namespace nnd
