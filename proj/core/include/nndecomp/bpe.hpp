// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Byte pair encoding over x86 mnemonics.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nndecomp/bundle.hpp"

namespace nnd {

/// A subword unit of a mnemonic. `word_start` marks the first unit of each
/// mnemonic so that a token sequence can be detokenized.
struct AtomicOp {
  std::string token;
  bool word_start = true;
  bool operator==(const AtomicOp&) const = default;
};

class BpeVocab {
 public:
  BpeVocab() = default;
  explicit BpeVocab(std::vector<std::pair<std::string, std::string>> merges);

  /// Merges in priority order.
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  /// Splits one mnemonic into its atomic OPs.
  std::vector<std::string> split(std::string_view mnemonic) const;

  void write(std::ostream& out) const;
  static BpeVocab read(std::istream& in);

  bool operator==(const BpeVocab& o) const { return merges_ == o.merges_; }

 private:
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::pair<std::string, std::string>, std::size_t> rank_;
};

/// Learns up to `num_merges` merges; a pair must occur at least
/// `min_frequency` times to be merged. Ties go to the lexicographically
/// smallest pair.
BpeVocab train_bpe(std::span<const std::string> corpus, std::size_t num_merges, std::size_t min_frequency = 2);

std::vector<AtomicOp> tokenize(const BpeVocab& vocab, std::span<const std::string> opcodes);
std::vector<AtomicOp> tokenize(const BpeVocab& vocab, const AssemblyFunction& function);
std::vector<std::string> detokenize(std::span<const AtomicOp> ops);

}  // namespace nnd
