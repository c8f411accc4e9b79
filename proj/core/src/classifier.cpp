// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "nndecomp/error.hpp"

namespace nnd {

namespace {

constexpr char kMagic[8] = {'N', 'N', 'D', 'I', 'D', 'M', 'D', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dot(const float* w, const Features& x) {
  double s = 0.0;
  for (const auto& [i, v] : x) s += static_cast<double>(w[i]) * v;
  return s;
}

std::array<double, kNumStyles> softmax3(const std::array<double, kNumStyles>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::array<double, kNumStyles> p{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumStyles; ++i) sum += p[i] = std::exp(z[i] - m);
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorCode::SchemaViolation, "truncated classifier model");
  return v;
}

}  // namespace

OperatorLabelVec OperatorLabelVec::from_kinds(const std::vector<OpKind>& kinds) {
  OperatorLabelVec v;
  for (OpKind k : kinds) v.set(k, true);
  return v;
}

std::vector<OpKind> OperatorLabelVec::kinds() const {
  std::vector<OpKind> out;
  for (std::size_t i = 0; i < kNumLabels; ++i)
    if (bits[i]) out.push_back(label_registry()[i]);
  return fused_order(out);
}

bool OperatorLabelVec::has(OpKind k) const {
  auto i = label_index(k);
  return i && bits[*i];
}

void OperatorLabelVec::set(OpKind k, bool on) {
  auto i = label_index(k);
  if (!i) fail(ErrorCode::InvalidArgument, "no label for " + std::string(kind_name(k)));
  bits[*i] = on;
  confidences[*i] = on ? 1.0 : 0.0;
}

bool OperatorLabelVec::is_utility() const { return std::none_of(bits.begin(), bits.end(), [](bool b) { return b; }); }

bool OperatorLabelVec::needs_review() const {
  double best = -1.0;
  for (std::size_t i = 0; i < kNumLabels; ++i)
    if (bits[i]) best = std::max(best, confidences[i]);
  return best >= 0.0 && best < kReviewConfidence;
}

std::string OperatorLabelVec::str() const {
  auto ks = kinds();
  if (ks.empty()) return "utility";
  std::string s;
  for (OpKind k : ks) s += (s.empty() ? "" : "+") + std::string(kind_name(k));
  return s;
}

Features featurize(const std::vector<AtomicOp>& ops) {
  std::map<std::uint32_t, float> counts;
  for (std::size_t n = 1; n <= 3; ++n)
    for (std::size_t i = 0; i + n <= ops.size(); ++i) {
      std::uint64_t h = fnv1a(0xcbf29ce484222325ull, std::to_string(n));
      for (std::size_t j = 0; j < n; ++j) {
        h = fnv1a(h, ops[i + j].word_start ? "\x1e" : "\x1f");
        h = fnv1a(h, ops[i + j].token);
      }
      counts[static_cast<std::uint32_t>(h & (kFeatureDim - 1))] += 1.0f;
    }
  Features f;
  double norm = 0.0;
  for (const auto& [i, c] : counts) {
    const float v = std::log1p(c);
    f.emplace_back(i, v);
    norm += static_cast<double>(v) * v;
  }
  norm = std::sqrt(norm);
  if (norm > 0)
    for (auto& [i, v] : f) v = static_cast<float>(v / norm);
  return f;
}

Features Classifier::features(const AssemblyFunction& function) const { return featurize(tokenize(vocab_, function)); }

OperatorLabelVec Classifier::classify(const AssemblyFunction& function) const {
  const Features x = features(function);
  OperatorLabelVec out;
  for (std::size_t l = 0; l < kNumLabels; ++l) {
    const double p = sigmoid(dot(&label_w_[l * kFeatureDim], x) + label_b_[l]);
    out.confidences[l] = p;
    out.bits[l] = p > 0.5;
  }
  return out;
}

std::array<double, kNumStyles> Classifier::provenance_probs(const AssemblyFunction& function) const {
  const Features x = features(function);
  std::array<double, kNumStyles> z{};
  for (std::size_t s = 0; s < kNumStyles; ++s) z[s] = dot(&style_w_[s * kFeatureDim], x) + style_b_[s];
  return softmax3(z);
}

Style Classifier::predict_provenance(const TraceBundle& bundle) const {
  std::array<double, kNumStyles> score{};
  for (const auto& f : bundle.functions) {
    auto p = provenance_probs(f);
    for (std::size_t s = 0; s < kNumStyles; ++s) score[s] += std::log(std::max(p[s], 1e-300));
  }
  std::size_t best = 0;
  for (std::size_t s = 1; s < kNumStyles; ++s)
    if (score[s] > score[best]) best = s;
  return static_cast<Style>(best);
}

void Classifier::save(const std::filesystem::path& file) const {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  out.write(kMagic, sizeof kMagic);
  put(out, kFormatVersion);
  put(out, static_cast<std::uint32_t>(kNumLabels));
  put(out, static_cast<std::uint32_t>(kFeatureBits));
  vocab_.write(out);
  out.write(reinterpret_cast<const char*>(label_w_.data()), static_cast<std::streamsize>(label_w_.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(label_b_.data()), sizeof label_b_);
  out.write(reinterpret_cast<const char*>(style_w_.data()), static_cast<std::streamsize>(style_w_.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(style_b_.data()), sizeof style_b_);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
}

Classifier Classifier::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, "cannot read classifier model " + file.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kMagic))
    fail(ErrorCode::SchemaViolation, file.string() + " is not a classifier model");
  if (get<std::uint32_t>(in) != kFormatVersion) fail(ErrorCode::SchemaViolation, "unsupported classifier model version");
  if (get<std::uint32_t>(in) != kNumLabels || get<std::uint32_t>(in) != kFeatureBits)
    fail(ErrorCode::SchemaViolation, "classifier model dimensions do not match this build");
  Classifier c;
  c.vocab_ = BpeVocab::read(in);
  c.label_w_.resize(kNumLabels * kFeatureDim);
  c.style_w_.resize(kNumStyles * kFeatureDim);
  in.read(reinterpret_cast<char*>(c.label_w_.data()), static_cast<std::streamsize>(c.label_w_.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(c.label_b_.data()), sizeof c.label_b_);
  in.read(reinterpret_cast<char*>(c.style_w_.data()), static_cast<std::streamsize>(c.style_w_.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(c.style_b_.data()), sizeof c.style_b_);
  if (!in) fail(ErrorCode::SchemaViolation, "truncated classifier model");
  return c;
}

Classifier train_classifier(const LabeledCorpus& corpus, const ClassifierHyper& hyper) {
  if (corpus.items.empty()) fail(ErrorCode::InsufficientLabels, "empty training corpus");
  std::array<std::size_t, kNumLabels> positives{};
  for (const auto& it : corpus.items)
    for (OpKind k : it.labels)
      if (auto i = label_index(k)) ++positives[*i];
  for (std::size_t l = 0; l < kNumLabels; ++l)
    if (positives[l] == 1)
      fail(ErrorCode::InsufficientLabels,
           "label " + std::string(kind_name(label_registry()[l])) + " has a single training example");

  Classifier c;
  std::vector<std::string> mnemonics;
  for (const auto& it : corpus.items)
    mnemonics.insert(mnemonics.end(), it.function.opcodes.begin(), it.function.opcodes.end());
  c.vocab_ = train_bpe(mnemonics, hyper.num_merges);

  std::vector<Features> xs;
  std::vector<OperatorLabelVec> ys;
  for (const auto& it : corpus.items) {
    xs.push_back(c.features(it.function));
    ys.push_back(OperatorLabelVec::from_kinds(it.labels));
  }
  c.label_w_.assign(kNumLabels * kFeatureDim, 0.0f);
  c.style_w_.assign(kNumStyles * kFeatureDim, 0.0f);

  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(hyper.seed);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = hyper.learning_rate / (1.0 + 0.1 * epoch);
    for (std::size_t idx : order) {
      const Features& x = xs[idx];
      for (std::size_t l = 0; l < kNumLabels; ++l) {
        float* w = &c.label_w_[l * kFeatureDim];
        const double g = sigmoid(dot(w, x) + c.label_b_[l]) - (ys[idx].bits[l] ? 1.0 : 0.0);
        for (const auto& [i, v] : x) w[i] -= static_cast<float>(lr * (g * v + hyper.l2 * w[i]));
        c.label_b_[l] -= static_cast<float>(lr * g);
      }
      std::array<double, kNumStyles> z{};
      for (std::size_t s = 0; s < kNumStyles; ++s) z[s] = dot(&c.style_w_[s * kFeatureDim], x) + c.style_b_[s];
      const auto p = softmax3(z);
      const auto truth = static_cast<std::size_t>(corpus.items[idx].provenance);
      for (std::size_t s = 0; s < kNumStyles; ++s) {
        float* w = &c.style_w_[s * kFeatureDim];
        const double g = p[s] - (s == truth ? 1.0 : 0.0);
        for (const auto& [i, v] : x) w[i] -= static_cast<float>(lr * (g * v + hyper.l2 * w[i]));
        c.style_b_[s] -= static_cast<float>(lr * g);
      }
    }
  }
  return c;
}

OperatorLabelVec classify(const Classifier& classifier, const AssemblyFunction& function) {
  return classifier.classify(function);
}

Style predict_provenance(const Classifier& classifier, const TraceBundle& bundle) {
  return classifier.predict_provenance(bundle);
}

}  // namespace nnd
