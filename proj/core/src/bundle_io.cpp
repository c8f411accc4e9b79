// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <regex>

#include <json.hpp>

#include "nndecomp/bundle.hpp"
#include "nndecomp/error.hpp"

namespace nnd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "nndecomp.bundle";
constexpr const char* kVersion = "1";

[[noreturn]] void schema(const fs::path& file, std::size_t line, const std::string& what) {
  std::string where = file.filename().string();
  if (line > 0) where += ":" + std::to_string(line);
  fail(ErrorCode::SchemaViolation, where + ": " + what);
}

json operand_json(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Register: return {{"reg", o.reg}};
    case Operand::Kind::Immediate: return {{"imm", o.imm}};
    case Operand::Kind::Memory:
      return {{"mem",
               {{"base", o.base}, {"index", o.index}, {"scale", o.scale}, {"disp", o.disp}, {"addr", o.address},
                {"width", o.width}}}};
  }
  return {};
}

Operand operand_from(const json& j) {
  if (j.contains("reg")) return Operand::r(j.at("reg").get<std::string>());
  if (j.contains("imm")) return Operand::i(j.at("imm").get<std::int64_t>());
  const auto& m = j.at("mem");
  return Operand::m(m.at("addr").get<std::uint64_t>(), m.at("width").get<std::uint32_t>(), m.at("base").get<std::string>(),
                    m.at("disp").get<std::int64_t>(), m.at("index").get<std::string>(), m.at("scale").get<std::uint32_t>());
}

json refs_json(const std::vector<MemRef>& refs) {
  json a = json::array();
  for (const auto& r : refs) a.push_back({r.address, r.width});
  return a;
}

std::vector<MemRef> refs_from(const json& j) {
  std::vector<MemRef> out;
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != 2) throw std::invalid_argument("access must be [address, width]");
    out.push_back({r[0].get<std::uint64_t>(), r[1].get<std::uint32_t>()});
  }
  return out;
}

json runs_json(const std::vector<MemRef>& refs) {
  json a = json::array();
  for (const auto& run : to_runs(refs)) a.push_back({run.base, run.width, run.count});
  return a;
}

std::vector<MemRef> runs_from(const json& j) {
  std::vector<AccessRun> runs;
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != 3) throw std::invalid_argument("run must be [base, width, count]");
    runs.push_back({r[0].get<std::uint64_t>(), r[1].get<std::uint32_t>(), r[2].get<std::uint64_t>()});
  }
  return from_runs(runs);
}

std::string entry_line(const TraceEntry& e) {
  json ops = json::array();
  for (const auto& o : e.operands) ops.push_back(operand_json(o));
  json regs = json::object();
  for (const auto& [k, v] : e.reg_values) regs[k] = v;
  json j = {{"seq_no", e.seq_no}, {"opcode", e.opcode}, {"operands", ops},
            {"reads", refs_json(e.reads)}, {"writes", refs_json(e.writes)}, {"reg_values", regs}};
  return j.dump();
}

TraceEntry entry_from(const json& j) {
  TraceEntry e;
  e.seq_no = j.at("seq_no").get<std::uint64_t>();
  e.opcode = j.at("opcode").get<std::string>();
  for (const auto& o : j.at("operands")) e.operands.push_back(operand_from(o));
  e.reads = refs_from(j.at("reads"));
  e.writes = refs_from(j.at("writes"));
  for (const auto& [k, v] : j.at("reg_values").items()) e.reg_values[k] = v.get<std::uint64_t>();
  return e;
}

json load_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::MissingFile, "missing " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    schema(file, 0, e.what());
  }
}

void save_json(const json& j, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  out << j.dump(1) << "\n";
  if (!out) fail(ErrorCode::IoError, "write failed: " + file.string());
}

void require(const fs::path& file) {
  if (!fs::exists(file)) fail(ErrorCode::MissingFile, "missing " + file.string());
}

/// Runs `body`, converting parse and type errors into SchemaViolation at file:line.
template <typename F>
auto guarded(const fs::path& file, std::size_t line, F&& body) {
  try {
    return body();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    schema(file, line, e.what());
  }
}

}  // namespace

void stream_trace(const fs::path& file, const std::function<void(TraceEntry&&)>& sink) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::MissingFile, "missing " + file.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    sink(guarded(file, n, [&] { return entry_from(json::parse(line)); }));
  }
}

TraceBundle read_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::MissingFile, "bundle directory " + dir.string() + " not found");
  for (const char* f : {"manifest.json", "functions.json", "callsites.json", "snapshot.bin", "snapshot.idx"})
    require(dir / f);

  TraceBundle b;
  const auto manifest_path = dir / "manifest.json";
  json manifest = load_json(manifest_path);
  guarded(manifest_path, 0, [&] {
    if (manifest.at("version").get<std::string>() != kVersion)
      throw std::invalid_argument("unsupported version " + manifest.at("version").dump());
    if (manifest.contains("provenance_truth") && !manifest.at("provenance_truth").is_null())
      b.provenance_truth = parse_style(manifest.at("provenance_truth").get<std::string>());
    return 0;
  });

  const auto functions_path = dir / "functions.json";
  json functions = load_json(functions_path);
  guarded(functions_path, 0, [&] {
    for (const auto& f : functions) {
      AssemblyFunction af;
      af.id = f.at("func_id").get<FuncId>();
      af.name = f.at("name").get<std::string>();
      af.entry = f.at("entry_address").get<std::uint64_t>();
      af.opcodes = f.at("opcode_sequence").get<std::vector<std::string>>();
      b.functions.push_back(std::move(af));
    }
    return 0;
  });

  const auto callsites_path = dir / "callsites.json";
  json callsites = load_json(callsites_path);
  guarded(callsites_path, 0, [&] {
    for (const auto& c : callsites)
      b.callsites.push_back(
          {c.at("call_index").get<std::uint64_t>(), c.at("func_id").get<FuncId>(), c.at("args").get<std::vector<std::uint64_t>>()});
    return 0;
  });

  static const std::regex trace_re(R"(trace_(\d+)\.jsonl)"), access_re(R"(access_(\d+)\.json)");
  std::vector<fs::path> entries;
  for (const auto& de : fs::directory_iterator(dir)) entries.push_back(de.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& p : entries) {
    std::smatch m;
    const std::string name = p.filename().string();
    if (std::regex_match(name, m, trace_re)) {
      auto id = static_cast<FuncId>(std::stoul(m[1]));
      auto& trace = b.traces[id];
      stream_trace(p, [&](TraceEntry&& e) { trace.push_back(std::move(e)); });
    } else if (std::regex_match(name, m, access_re)) {
      auto id = static_cast<FuncId>(std::stoul(m[1]));
      json j = load_json(p);
      b.access_logs[id] = guarded(p, 0, [&] {
        MemAccessLog log;
        log.func_id = j.at("func_id").get<FuncId>();
        log.reads = runs_from(j.at("reads"));
        log.writes = runs_from(j.at("writes"));
        return log;
      });
    }
  }

  const auto idx_path = dir / "snapshot.idx";
  json idx = load_json(idx_path);
  std::ifstream bin(dir / "snapshot.bin", std::ios::binary);
  if (!bin) fail(ErrorCode::MissingFile, "missing " + (dir / "snapshot.bin").string());
  guarded(idx_path, 0, [&] {
    for (const auto& r : idx) {
      SnapshotRegion reg;
      reg.base = r.at("base").get<std::uint64_t>();
      auto offset = r.at("offset").get<std::uint64_t>();
      auto size = r.at("size").get<std::uint64_t>();
      reg.bytes.resize(size);
      bin.seekg(static_cast<std::streamoff>(offset));
      bin.read(reinterpret_cast<char*>(reg.bytes.data()), static_cast<std::streamsize>(size));
      if (static_cast<std::uint64_t>(bin.gcount()) != size)
        throw std::invalid_argument("region " + hex(reg.base) + " extends past end of snapshot.bin");
      b.snapshot.regions.push_back(std::move(reg));
    }
    return 0;
  });

  validate(b);
  return b;
}

void write_bundle(const TraceBundle& b, const fs::path& dir) {
  validate(b);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  json manifest = {{"format", kFormat}, {"version", kVersion}};
  if (b.provenance_truth) manifest["provenance_truth"] = style_name(*b.provenance_truth);
  save_json(manifest, dir / "manifest.json");

  json functions = json::array();
  for (const auto& f : b.functions)
    functions.push_back(
        {{"func_id", f.id}, {"name", f.name}, {"entry_address", f.entry}, {"opcode_sequence", f.opcodes}});
  save_json(functions, dir / "functions.json");

  json callsites = json::array();
  for (const auto& c : b.callsites) callsites.push_back({{"call_index", c.call_index}, {"func_id", c.func_id}, {"args", c.args}});
  save_json(callsites, dir / "callsites.json");

  // Stale per-function files from an earlier write would be read back.
  static const std::regex stale_re(R"((trace_\d+\.jsonl)|(access_\d+\.json))");
  for (const auto& de : fs::directory_iterator(dir))
    if (std::regex_match(de.path().filename().string(), stale_re)) fs::remove(de.path());

  for (const auto& [id, trace] : b.traces) {
    const auto file = dir / ("trace_" + std::to_string(id) + ".jsonl");
    std::ofstream out(file, std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
    for (const auto& e : trace) out << entry_line(e) << '\n';
    if (!out) fail(ErrorCode::IoError, "write failed: " + file.string());
  }
  for (const auto& [id, log] : b.access_logs) {
    MemAccessLog sorted = log;
    sorted.normalize();
    save_json({{"func_id", id}, {"reads", runs_json(sorted.reads)}, {"writes", runs_json(sorted.writes)}},
              dir / ("access_" + std::to_string(id) + ".json"));
  }

  json idx = json::array();
  std::ofstream bin(dir / "snapshot.bin", std::ios::binary | std::ios::trunc);
  if (!bin) fail(ErrorCode::IoError, "cannot write snapshot.bin");
  std::uint64_t offset = 0;
  for (const auto& r : b.snapshot.regions) {
    bin.write(reinterpret_cast<const char*>(r.bytes.data()), static_cast<std::streamsize>(r.bytes.size()));
    idx.push_back({{"base", r.base}, {"offset", offset}, {"size", r.bytes.size()}});
    offset += r.bytes.size();
  }
  if (!bin) fail(ErrorCode::IoError, "write failed: snapshot.bin");
  save_json(idx, dir / "snapshot.idx");
}

}  // namespace nnd
