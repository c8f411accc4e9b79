// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// nndecomp: generate trace bundles, train the operator classifier and
// decompile bundles back into model specifications.
//
// Exit codes: 0 clean, 2 recovered with findings that need review, 1 fatal.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "nndecomp/evaluator.hpp"
#include "nndecomp/harness.hpp"
#include "nndecomp/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nnd;

namespace {

struct StageError {
  std::string stage;
  std::string message;
};

/// Runs `fn`, tagging library errors with `stage`.
template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw StageError{stage, e.what()};
  }
}

ModelSpec named_model(const std::string& name, std::uint64_t seed) {
  if (name == "tiny_conv") return models::tiny_conv();
  if (name == "random_cnn") return models::random_cnn(seed);
  for (auto& m : models::acceptance_suite(seed))
    if (m.name == name) return m.spec;
  if (fs::is_directory(name)) return load_spec(name);
  fail(ErrorCode::InvalidArgument, "unknown model '" + name + "' (not a built-in name or spec directory)");
}

void log_stage(const std::string& stage, double ms) {
  std::cerr << "[time] " << stage << " " << ms << " ms\n";
}

Classifier load_classifier(const std::string& path) {
  return staged("load", [&] { return Classifier::load(path); });
}

struct Args {
  std::uint64_t seed = 1;
  std::string model = "vgg_mini";
  std::string style = "glow";
  std::string out;
  std::string bundle;
  std::string classifier;
  std::string labels;
  std::string corpus;
  std::string source;
  std::string recovered;
  std::string taint = "auto";
  double tol = kDefaultTolerance;
  std::size_t inputs = 20;
  std::size_t count = 60;
  std::size_t workers = 0;
  bool adversarial = false;
  bool reshape_conv = false;
  bool fusion = false;
  bool no_fusion = false;
  std::string layout;
};

CodegenStyle codegen_style(const Args& a) {
  CodegenStyle c = CodegenStyle::preset(parse_style(a.style));
  if (a.fusion) c.fusion = true;
  if (a.no_fusion) c.fusion = false;
  if (!a.layout.empty()) {
    if (a.layout == "none") {
      c.layout = LayoutOpt::none();
    } else if (a.layout.rfind("glow5d:", 0) == 0) {
      c.layout = LayoutOpt::glow5d(std::stoi(a.layout.substr(7)));
    } else if (a.layout == "tvm6d") {
      c.layout = LayoutOpt::tvm6d(0, 0);
    } else if (a.layout.rfind("tvm6d:", 0) == 0) {
      const auto rest = a.layout.substr(6);
      const auto comma = rest.find(',');
      if (comma == std::string::npos) fail(ErrorCode::InvalidArgument, "tvm6d layout needs A,B");
      c.layout = LayoutOpt::tvm6d(std::stoi(rest.substr(0, comma)), std::stoi(rest.substr(comma + 1)));
    } else {
      fail(ErrorCode::InvalidArgument, "unknown layout '" + a.layout + "'");
    }
  }
  c.validate();
  return c;
}

int cmd_gen(const Args& a) {
  const ModelSpec spec = named_model(a.model, a.seed);
  HarnessOptions opt;
  opt.adversarial = a.adversarial;
  opt.reshape_conv = a.reshape_conv;
  auto [bundle, truth] = staged("gen", [&] { return emit_bundle(spec, codegen_style(a), a.seed, opt); });
  fs::create_directories(a.out);
  write_bundle(bundle, a.out);
  save_ground_truth(truth, a.out);
  save_spec(spec, fs::path(a.out) / "source");
  std::cout << "wrote bundle with " << bundle.functions.size() << " functions and " << bundle.callsites.size()
            << " calls to " << a.out << "\n";
  return 0;
}

int cmd_gen_corpus(const Args& a) {
  const auto specs = models::corpus_suite(a.count, a.seed);
  const LabeledCorpus corpus =
      staged("gen", [&] { return emit_corpus(specs, {Style::TvmO0, Style::TvmO3, Style::Glow}, a.seed); });
  save_corpus(corpus, a.out);
  std::cout << "wrote " << corpus.items.size() << " labeled functions to " << a.out << "\n";
  return 0;
}

int cmd_train(const Args& a) {
  const LabeledCorpus corpus = load_corpus(a.corpus);
  ClassifierHyper h;
  h.seed = a.seed;
  const Classifier c = staged("train", [&] { return train_classifier(corpus, h); });
  c.save(a.out);
  std::cout << "trained on " << corpus.items.size() << " functions, " << c.vocab().merges().size()
            << " BPE merges; wrote " << a.out << "\n";
  return 0;
}

int cmd_classify(const Args& a) {
  const TraceBundle bundle = read_bundle(a.bundle);
  const Classifier c = load_classifier(a.classifier);
  FunctionLabels labels;
  for (const auto& f : bundle.functions) labels[f.id] = c.classify(f);
  const Style style = c.predict_provenance(bundle);
  std::cout << "provenance " << style_name(style) << "\n";
  for (const auto& f : bundle.functions) {
    const auto& l = labels.at(f.id);
    std::cout << f.id << " " << f.name << " " << l.str() << (l.needs_review() ? " (review)" : "") << "\n";
  }
  if (!a.out.empty()) write_labels(labels, a.out);
  return 0;
}

int cmd_topology(const Args& a) {
  const TraceBundle bundle = read_bundle(a.bundle);
  Style style = parse_style(a.style);
  FunctionLabels labels;
  if (!a.labels.empty()) {
    labels = read_labels(a.labels);
  } else {
    const Classifier c = load_classifier(a.classifier);
    for (const auto& f : bundle.functions) labels[f.id] = c.classify(f);
    style = c.predict_provenance(bundle);
  }
  const CompGraph g =
      staged("topology", [&] { return recover_topology(bundle, labels, SignatureConfig::builtin(), style); });
  for (const auto& e : g.edges) std::cout << e.producer << " -> " << e.consumer << "\n";
  if (!a.out.empty()) write_graph(g, a.out);
  return 0;
}

int cmd_decompile(const Args& a) {
  const TraceBundle bundle = staged("load", [&] { return read_bundle(a.bundle); });
  fs::create_directories(a.out);
  DecompileOptions opt;
  opt.taint = parse_taint_policy(a.taint);
  opt.workers = a.workers;
  opt.on_stage = log_stage;

  std::optional<Classifier> clf;
  if (!a.labels.empty()) {
    opt.labels = read_labels(a.labels);
    opt.style = parse_style(a.style);
  } else {
    clf = load_classifier(a.classifier);
    // Classification results reach disk before the later stages run.
    FunctionLabels labels = staged("classify", [&] {
      FunctionLabels l;
      for (const auto& f : bundle.functions) l[f.id] = clf->classify(f);
      return l;
    });
    write_labels(labels, fs::path(a.out) / "labels.json");
    opt.style = staged("provenance", [&] { return clf->predict_provenance(bundle); });
    opt.labels = std::move(labels);
  }
  const DecompileResult r = staged("decompile", [&] { return decompile(bundle, clf ? &*clf : nullptr, opt); });
  staged("export", [&] {
    export_result(r, bundle, a.out);
    return 0;
  });
  std::size_t review = 0, fixed = 0;
  for (const auto& f : r.draft.findings) (f.needs_review() ? review : fixed)++;
  std::cout << "provenance " << style_name(r.style) << ", " << r.draft.spec.ops.size() << " operators, " << fixed
            << " fixed findings, " << review << " need review; wrote " << a.out << "\n";
  return r.exit_code();
}

int cmd_verify(const Args& a) {
  const ModelSpec src = staged("load", [&] { return load_spec(a.source); });
  const ModelSpec rec = staged("load", [&] { return load_spec(a.recovered); });
  if (src.input_shape != rec.input_shape) {
    std::cout << "FAIL: input shapes differ (" << shape_str(src.input_shape) << " vs " << shape_str(rec.input_shape)
              << ")\n";
    return 2;
  }
  const auto inputs = random_inputs(src, a.inputs, a.seed);
  const EquivalenceReport rep = staged("verify", [&] { return compare(src, rec, inputs, a.tol); });
  std::cout << rep.summary() << "\n";
  return rep.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recover neural network models from compiled executables' traces"};
  app.require_subcommand(1);
  Args a;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", a.seed, "Random seed")->capture_default_str(); };

  auto* gen = app.add_subcommand("gen", "Emit a trace bundle for a model");
  add_seed(gen);
  gen->add_option("--model", a.model, "Built-in model name or spec directory")->capture_default_str();
  gen->add_option("--style", a.style, "tvm-o0, tvm-o3 or glow")->capture_default_str();
  gen->add_option("--layout", a.layout, "none, glow5d:A, tvm6d or tvm6d:A,B");
  gen->add_flag("--fusion", a.fusion, "Force operator fusion on");
  gen->add_flag("--no-fusion", a.no_fusion, "Force operator fusion off");
  gen->add_flag("--adversarial", a.adversarial, "Reverse the convolution weight walk");
  gen->add_flag("--reshape-conv", a.reshape_conv, "Lower convolutions through an im2col reshape");
  gen->add_option("-o,--out", a.out, "Bundle directory")->required();

  auto* corpus = app.add_subcommand("gen-corpus", "Emit a labeled function corpus");
  add_seed(corpus);
  corpus->add_option("--count", a.count, "Number of source models")->capture_default_str();
  corpus->add_option("-o,--out", a.out, "Corpus file")->required();

  auto* train = app.add_subcommand("train-id", "Train the operator classifier");
  add_seed(train);
  train->add_option("--corpus", a.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", a.out, "Classifier file")->required();

  auto* classify = app.add_subcommand("classify", "Label every function of a bundle");
  classify->add_option("--bundle", a.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  classify->add_option("--classifier", a.classifier, "Classifier file")->required()->check(CLI::ExistingFile);
  classify->add_option("-o,--out", a.out, "labels.json to write");

  auto* topo = app.add_subcommand("topology", "Recover the dataflow graph of a bundle");
  topo->add_option("--bundle", a.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  auto* topo_clf = topo->add_option("--classifier", a.classifier, "Classifier file")->check(CLI::ExistingFile);
  auto* topo_lbl = topo->add_option("--labels", a.labels, "labels.json instead of a classifier")->check(CLI::ExistingFile);
  topo_clf->excludes(topo_lbl);
  topo->add_option("--style", a.style, "Provenance when --labels is given")->capture_default_str();
  topo->add_option("-o,--out", a.out, "graph.json to write");

  auto* dec = app.add_subcommand("decompile", "Recover a model specification");
  dec->add_option("--bundle", a.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  auto* dec_clf = dec->add_option("--classifier", a.classifier, "Classifier file")->check(CLI::ExistingFile);
  auto* dec_lbl = dec->add_option("--labels", a.labels, "labels.json instead of a classifier")->check(CLI::ExistingFile);
  dec_clf->excludes(dec_lbl);
  dec->add_option("--style", a.style, "Provenance when --labels is given")->capture_default_str();
  dec->add_option("--taint", a.taint, "auto, always or never")->capture_default_str();
  dec->add_option("--workers", a.workers, "Worker threads (default: NNDECOMP_WORKERS or all cores)");
  dec->add_option("-o,--out", a.out, "Output directory")->required();

  auto* ver = app.add_subcommand("verify", "Compare two model specifications on random inputs");
  add_seed(ver);
  ver->add_option("--source", a.source, "Reference spec directory")->required()->check(CLI::ExistingDirectory);
  ver->add_option("--recovered", a.recovered, "Recovered spec directory")->required()->check(CLI::ExistingDirectory);
  ver->add_option("--inputs", a.inputs, "Number of random inputs")->capture_default_str();
  ver->add_option("--tol", a.tol, "Absolute tolerance")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const std::map<CLI::App*, std::function<int(const Args&)>> commands = {
      {gen, cmd_gen},           {corpus, cmd_gen_corpus}, {train, cmd_train},   {classify, cmd_classify},
      {topo, cmd_topology},     {dec, cmd_decompile},     {ver, cmd_verify}};
  try {
    for (const auto& [sub, fn] : commands) {
      if (!sub->parsed()) continue;
      if ((sub == topo || sub == dec) && a.classifier.empty() && a.labels.empty())
        throw CLI::RequiredError("--classifier or --labels");
      return fn(a);
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const StageError& e) {
    std::cerr << "error [" << e.stage << "]: " << e.message << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
