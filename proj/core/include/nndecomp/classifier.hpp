// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Operator identification: multi-label classification of assembly
// functions and compilation provenance prediction.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nndecomp/bpe.hpp"
#include "nndecomp/bundle.hpp"
#include "nndecomp/harness.hpp"
#include "nndecomp/op_kind.hpp"

namespace nnd {

inline constexpr double kReviewConfidence = 0.8;

struct OperatorLabelVec {
  std::array<bool, kNumLabels> bits{};
  std::array<double, kNumLabels> confidences{};

  /// Hard labels with confidence 1.
  static OperatorLabelVec from_kinds(const std::vector<OpKind>& kinds);
  /// Set bits in fused order.
  std::vector<OpKind> kinds() const;
  bool has(OpKind k) const;
  void set(OpKind k, bool on);
  bool is_utility() const;
  /// The most confident set bit is below the review threshold.
  bool needs_review() const;
  std::string str() const;  // "Conv+BiasAdd+ReLU" or "utility"
  bool operator==(const OperatorLabelVec&) const = default;
};

struct ClassifierHyper {
  double l2 = 1e-5;
  int epochs = 30;
  std::uint64_t seed = 1;
  std::size_t num_merges = 400;
  double learning_rate = 0.5;
};

inline constexpr std::size_t kFeatureBits = 15;
inline constexpr std::size_t kFeatureDim = std::size_t{1} << kFeatureBits;

/// Sparse feature vector: (index, value) pairs sorted by index.
using Features = std::vector<std::pair<std::uint32_t, float>>;

/// Hashed 1-, 2- and 3-grams of the atomic OP sequence, log-scaled counts,
/// L2-normalized.
Features featurize(const std::vector<AtomicOp>& ops);

/// Per-label logistic regression plus a multinomial provenance model, with
/// the BPE vocabulary they were trained on.
class Classifier {
 public:
  const BpeVocab& vocab() const { return vocab_; }

  OperatorLabelVec classify(const AssemblyFunction& function) const;
  /// Class probabilities over {TvmO0, TvmO3, Glow}.
  std::array<double, kNumStyles> provenance_probs(const AssemblyFunction& function) const;
  /// Sum of per-function log probabilities, argmax; ties go to the lower style.
  Style predict_provenance(const TraceBundle& bundle) const;

  void save(const std::filesystem::path& file) const;
  static Classifier load(const std::filesystem::path& file);

  bool operator==(const Classifier&) const = default;

 private:
  friend Classifier train_classifier(const LabeledCorpus& corpus, const ClassifierHyper& hyper);

  Features features(const AssemblyFunction& function) const;

  BpeVocab vocab_;
  std::vector<float> label_w_;  // kNumLabels x kFeatureDim
  std::array<float, kNumLabels> label_b_{};
  std::vector<float> style_w_;  // kNumStyles x kFeatureDim
  std::array<float, kNumStyles> style_b_{};
};

/// Throws InsufficientLabels when the corpus is empty or a label occurs
/// exactly once.
Classifier train_classifier(const LabeledCorpus& corpus, const ClassifierHyper& hyper = {});

OperatorLabelVec classify(const Classifier& classifier, const AssemblyFunction& function);
Style predict_provenance(const Classifier& classifier, const TraceBundle& bundle);

}  // namespace nnd
