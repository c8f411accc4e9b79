// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "nndecomp/error.hpp"

namespace nnd {

using nlohmann::json;
namespace fs = std::filesystem;

std::string Source::str() const {
  switch (kind) {
    case Kind::ModelInput: return "input";
    case Kind::Op: return "op:" + name;
    case Kind::Param: return "param:" + name;
  }
  return "input";
}

Source Source::parse(const std::string& text) {
  if (text == "input") return model_input();
  if (text.rfind("op:", 0) == 0) return op(text.substr(3));
  if (text.rfind("param:", 0) == 0) return param(text.substr(6));
  fail(ErrorCode::SchemaViolation, "bad op input reference '" + text + "'");
}

double OpSpec::attr(const std::string& key) const {
  auto it = attrs.find(key);
  if (it == attrs.end()) fail(ErrorCode::SchemaViolation, "op " + id + " lacks attribute " + key);
  return it->second;
}

double OpSpec::attr_or(const std::string& key, double fallback) const {
  auto it = attrs.find(key);
  return it == attrs.end() ? fallback : it->second;
}

std::int64_t OpSpec::iattr(const std::string& key) const {
  double v = attr(key);
  if (v != std::floor(v)) fail(ErrorCode::NonIntegerDim, "op " + id + " attribute " + key + " = " + std::to_string(v));
  return static_cast<std::int64_t>(v);
}

const OpSpec* ModelSpec::find(const std::string& id) const {
  for (const auto& op : ops)
    if (op.id == id) return &op;
  return nullptr;
}

std::vector<Edge> ModelSpec::edges() const {
  std::vector<Edge> out;
  for (const auto& op : ops)
    for (std::size_t slot = 0; slot < op.inputs.size(); ++slot)
      if (op.inputs[slot].kind == Source::Kind::Op) out.push_back({op.inputs[slot].name, op.id, slot});
  return out;
}

std::vector<std::string> ModelSpec::outputs() const {
  std::set<std::string> consumed;
  for (const auto& e : edges()) consumed.insert(e.producer);
  std::vector<std::string> out;
  for (const auto& op : ops)
    if (!consumed.count(op.id)) out.push_back(op.id);
  return out;
}

const Tensor& ModelSpec::param(const OpSpec& op, const std::string& role) const {
  auto it = op.params.find(role);
  if (it == op.params.end()) fail(ErrorCode::SchemaViolation, "op " + op.id + " lacks parameter role " + role);
  auto pt = params.find(it->second);
  if (pt == params.end()) fail(ErrorCode::SchemaViolation, "parameter " + it->second + " not stored");
  return pt->second;
}

bool ModelSpec::structurally_equal(const ModelSpec& other) const {
  if (input_shape != other.input_shape || ops != other.ops || params.size() != other.params.size()) return false;
  for (const auto& [name, t] : params) {
    auto it = other.params.find(name);
    if (it == other.params.end() || !t.bit_equal(it->second)) return false;
  }
  return true;
}

std::optional<std::int64_t> window_out(std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t p) {
  if (k <= 0 || s <= 0 || p < 0) return std::nullopt;
  std::int64_t span = in + 2 * p - k;
  if (span < 0) return std::nullopt;
  return span / s + 1;
}

namespace {

[[noreturn]] void shape_fail(const OpSpec& op, const std::string& why) {
  fail(ErrorCode::ShapeMismatch, "op " + op.id + " (" + std::string(kind_name(op.kind)) + "): " + why);
}

Shape broadcast(const OpSpec& op, const Shape& a, const Shape& b) {
  if (a == b) return a;
  const Shape& big = numel(a) >= numel(b) ? a : b;
  const Shape& small = numel(a) >= numel(b) ? b : a;
  std::int64_t n = numel(small);
  if (n == 1 || n == numel(big)) return big;
  if (big.size() >= 2 && n == big[1]) return big;
  shape_fail(op, "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
}

void expect_param(const ModelSpec& spec, const OpSpec& op, const std::string& role, const Shape& shape) {
  const Tensor& t = spec.param(op, role);
  if (t.shape() != shape)
    shape_fail(op, "parameter " + role + " has shape " + shape_str(t.shape()) + ", expected " + shape_str(shape));
}

std::int64_t square_side(const OpSpec& op, const Shape& s) {
  if (s.size() != 4 || s[0] != 1 || s[2] != s[3]) shape_fail(op, "expects square NCHW input, got " + shape_str(s));
  return s[2];
}

Shape op_shape(const ModelSpec& spec, const OpSpec& op, const std::vector<Shape>& in) {
  auto need_inputs = [&](std::size_t n) {
    if (in.size() != n) shape_fail(op, "expects " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
  };
  switch (op.kind) {
    case OpKind::Conv: {
      need_inputs(1);
      std::int64_t h = square_side(op, in[0]);
      auto K = op.iattr("K"), S = op.iattr("S"), P = op.iattr("P"), OC = op.iattr("O_C"), IC = op.iattr("I_C");
      if (in[0][1] != IC) shape_fail(op, "input channels " + std::to_string(in[0][1]) + " != I_C " + std::to_string(IC));
      auto oh = window_out(h, K, S, P);
      if (!oh || *oh <= 0) shape_fail(op, "window does not fit input");
      expect_param(spec, op, "weights", {OC, IC, K, K});
      if (op.has_param("bias")) expect_param(spec, op, "bias", {OC});
      return {1, OC, *oh, *oh};
    }
    case OpKind::Dense: {
      need_inputs(1);
      auto M = op.iattr("M"), N = op.iattr("N");
      if (numel(in[0]) != M) shape_fail(op, "input has " + std::to_string(numel(in[0])) + " elements, M=" + std::to_string(M));
      expect_param(spec, op, "weights", {N, M});
      if (op.has_param("bias")) expect_param(spec, op, "bias", {N});
      return {1, N};
    }
    case OpKind::BiasAdd: {
      need_inputs(1);
      const Tensor& b = spec.param(op, "bias");
      return broadcast(op, in[0], b.shape());
    }
    case OpKind::Add:
    case OpKind::Divide:
    case OpKind::Multiply:
      need_inputs(2);
      return broadcast(op, in[0], in[1]);
    case OpKind::ReLU:
    case OpKind::Sqrt:
    case OpKind::Negative:
    case OpKind::Softmax:
      need_inputs(1);
      return in[0];
    case OpKind::LRN:
      need_inputs(1);
      if (in[0].size() < 2) shape_fail(op, "LRN needs a channel axis");
      if (op.iattr("size") <= 0) shape_fail(op, "LRN size must be positive");
      return in[0];
    case OpKind::MaxPool:
    case OpKind::AvgPool: {
      need_inputs(1);
      std::int64_t h = square_side(op, in[0]);
      auto oh = window_out(h, op.iattr("K"), op.iattr("S"), 0);
      if (!oh || *oh <= 0) shape_fail(op, "pool window does not fit input");
      return {1, in[0][1], *oh, *oh};
    }
    case OpKind::Embedding: {
      need_inputs(1);
      const Tensor& table = spec.param(op, "weights");
      if (table.shape().size() != 2) shape_fail(op, "embedding table must be 2-D");
      return {1, numel(in[0]), table.shape()[1]};
    }
    case OpKind::BatchNorm: {
      need_inputs(1);
      if (in[0].size() < 2) shape_fail(op, "BatchNorm needs a channel axis");
      for (const char* role : {"gamma", "beta", "mean", "var"}) expect_param(spec, op, role, {in[0][1]});
      return in[0];
    }
    case OpKind::Concat: {
      need_inputs(2);
      if (in[0].size() != in[1].size() || in[0].size() < 2) shape_fail(op, "concat rank mismatch");
      for (std::size_t d = 0; d < in[0].size(); ++d)
        if (d != 1 && in[0][d] != in[1][d]) shape_fail(op, "concat non-channel dims differ");
      Shape out = in[0];
      out[1] += in[1][1];
      return out;
    }
    case OpKind::Split: {
      need_inputs(1);
      auto off = op.iattr("offset"), size = op.iattr("size");
      if (in[0].size() < 2 || off < 0 || size <= 0 || off + size > in[0][1]) shape_fail(op, "split slice out of range");
      Shape out = in[0];
      out[1] = size;
      return out;
    }
    case OpKind::Flatten:
      need_inputs(1);
      return {1, numel(in[0])};
    default:
      fail(ErrorCode::SchemaViolation,
           "op " + op.id + ": kind " + std::string(kind_name(op.kind)) + " is a codegen layout kernel, not a model operator");
  }
}

}  // namespace

std::map<std::string, Shape> infer_shapes(const ModelSpec& spec) {
  if (spec.input_shape.empty() || numel(spec.input_shape) <= 0)
    fail(ErrorCode::SchemaViolation, "model input shape is empty");
  std::map<std::string, Shape> shapes;
  for (const auto& op : spec.ops) {
    if (shapes.count(op.id)) fail(ErrorCode::SchemaViolation, "duplicate op id " + op.id);
    std::vector<Shape> in;
    for (const auto& src : op.inputs) {
      switch (src.kind) {
        case Source::Kind::ModelInput: in.push_back(spec.input_shape); break;
        case Source::Kind::Op: {
          auto it = shapes.find(src.name);
          if (it == shapes.end())
            fail(ErrorCode::SchemaViolation, "op " + op.id + " consumes " + src.name + " before it is defined");
          in.push_back(it->second);
          break;
        }
        case Source::Kind::Param: {
          auto it = spec.params.find(src.name);
          if (it == spec.params.end()) fail(ErrorCode::SchemaViolation, "op " + op.id + " reads missing param " + src.name);
          in.push_back(it->second.shape());
          break;
        }
      }
    }
    shapes[op.id] = op_shape(spec, op, in);
  }
  return shapes;
}

Shape infer_op_shape(const ModelSpec& spec, const OpSpec& op, const std::vector<Shape>& inputs) {
  return op_shape(spec, op, inputs);
}

void validate(const ModelSpec& spec) {
  if (spec.ops.empty()) fail(ErrorCode::SchemaViolation, "model has no operators");
  bool uses_input = false;
  for (const auto& op : spec.ops)
    for (const auto& s : op.inputs) uses_input |= s.kind == Source::Kind::ModelInput;
  if (!uses_input) fail(ErrorCode::SchemaViolation, "no operator consumes the model input");
  for (const auto& op : spec.ops)
    for (const auto& [role, name] : op.params)
      if (!spec.params.count(name)) fail(ErrorCode::SchemaViolation, "op " + op.id + " references missing param " + name);
  infer_shapes(spec);
}

void write_f32(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  static_assert(std::endian::native == std::endian::little, "f32 blobs are little-endian");
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<float> read_f32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, path.string());
  in.seekg(0, std::ios::end);
  auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (size % sizeof(float) != 0) fail(ErrorCode::TensorSizeMismatch, path.string() + " is not a whole number of f32 values");
  std::vector<float> values(size / sizeof(float));
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(size));
  return values;
}

namespace {

json attr_json(double v) {
  if (v == std::floor(v) && std::fabs(v) < 9.0e15) return static_cast<std::int64_t>(v);
  return v;
}

}  // namespace

void save_spec(const ModelSpec& spec, const fs::path& dir) {
  fs::create_directories(dir / "params");
  json j;
  j["format"] = "nndecomp.model";
  j["version"] = 1;
  j["input_shape"] = spec.input_shape;
  json ops = json::array();
  for (const auto& op : spec.ops) {
    json o;
    o["id"] = op.id;
    o["kind"] = std::string(kind_name(op.kind));
    json inputs = json::array();
    for (const auto& s : op.inputs) inputs.push_back(s.str());
    o["inputs"] = inputs;
    json attrs = json::object();
    for (const auto& [k, v] : op.attrs) attrs[k] = attr_json(v);
    o["attrs"] = attrs;
    o["params"] = op.params;
    ops.push_back(o);
  }
  j["ops"] = ops;
  json params = json::object();
  for (const auto& [name, t] : spec.params) {
    if (name.find('/') != std::string::npos) fail(ErrorCode::SchemaViolation, "param name contains '/': " + name);
    std::string file = "params/" + name + ".f32";
    write_f32(dir / file, t.data());
    params[name] = {{"shape", t.shape()}, {"file", file}};
  }
  j["params"] = params;
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + (dir / "model.json").string());
  out << j.dump(2) << "\n";
}

ModelSpec load_spec(const fs::path& dir) {
  fs::path file = fs::is_directory(dir) ? dir / "model.json" : dir;
  fs::path root = file.parent_path();
  std::ifstream in(file);
  if (!in) fail(ErrorCode::MissingFile, file.string());
  ModelSpec spec;
  try {
    json j = json::parse(in);
    if (j.at("format") != "nndecomp.model" || j.at("version") != 1)
      fail(ErrorCode::SchemaViolation, file.string() + ": unsupported format/version");
    spec.input_shape = j.at("input_shape").get<Shape>();
    for (const auto& o : j.at("ops")) {
      OpSpec op;
      op.id = o.at("id").get<std::string>();
      auto kind = parse_kind(o.at("kind").get<std::string>());
      if (!kind) fail(ErrorCode::SchemaViolation, "unknown op kind " + o.at("kind").dump());
      op.kind = *kind;
      for (const auto& s : o.at("inputs")) op.inputs.push_back(Source::parse(s.get<std::string>()));
      for (const auto& [k, v] : o.at("attrs").items()) op.attrs[k] = v.get<double>();
      op.params = o.at("params").get<std::map<std::string, std::string>>();
      spec.ops.push_back(std::move(op));
    }
    for (const auto& [name, p] : j.at("params").items()) {
      auto shape = p.at("shape").get<Shape>();
      auto values = read_f32(root / p.at("file").get<std::string>());
      if (static_cast<std::int64_t>(values.size()) != numel(shape))
        fail(ErrorCode::TensorSizeMismatch, "param " + name + ": file holds " + std::to_string(values.size()) +
                                                " values, shape " + shape_str(shape) + " needs " + std::to_string(numel(shape)));
      spec.params.emplace(name, Tensor(std::move(shape), std::move(values)));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, file.string() + ": " + e.what());
  }
  validate(spec);
  return spec;
}

}  // namespace nnd
