// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/bpe.hpp"

#include <cstdint>
#include <istream>
#include <ostream>

#include "nndecomp/error.hpp"

namespace nnd {

namespace {

std::vector<std::string> chars(std::string_view word) {
  std::vector<std::string> out;
  for (char c : word) out.emplace_back(1, c);
  return out;
}

void merge_pair(std::vector<std::string>& symbols, const std::string& a, const std::string& b) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
      out.push_back(a + b);
      ++i;
    } else {
      out.push_back(symbols[i]);
    }
  }
  symbols = std::move(out);
}

void write_string(std::ostream& out, const std::string& s) {
  const auto n = static_cast<std::uint32_t>(s.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n > (1u << 20)) fail(ErrorCode::SchemaViolation, "corrupt vocabulary string");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) fail(ErrorCode::SchemaViolation, "truncated vocabulary");
  return s;
}

}  // namespace

BpeVocab::BpeVocab(std::vector<std::pair<std::string, std::string>> merges) : merges_(std::move(merges)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) rank_.emplace(merges_[i], i);
}

std::vector<std::string> BpeVocab::split(std::string_view mnemonic) const {
  auto symbols = chars(mnemonic);
  while (symbols.size() > 1) {
    std::size_t best = merges_.size();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find({symbols[i], symbols[i + 1]});
      if (it != rank_.end() && it->second < best) best = it->second;
    }
    if (best == merges_.size()) break;
    merge_pair(symbols, merges_[best].first, merges_[best].second);
  }
  return symbols;
}

void BpeVocab::write(std::ostream& out) const {
  const auto n = static_cast<std::uint32_t>(merges_.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& [a, b] : merges_) {
    write_string(out, a);
    write_string(out, b);
  }
}

BpeVocab BpeVocab::read(std::istream& in) {
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in) fail(ErrorCode::SchemaViolation, "truncated vocabulary");
  std::vector<std::pair<std::string, std::string>> merges;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto a = read_string(in);
    auto b = read_string(in);
    merges.emplace_back(std::move(a), std::move(b));
  }
  return BpeVocab(std::move(merges));
}

BpeVocab train_bpe(std::span<const std::string> corpus, std::size_t num_merges, std::size_t min_frequency) {
  std::map<std::string, std::size_t> counts;
  for (const auto& m : corpus)
    if (!m.empty()) ++counts[m];
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  for (const auto& [w, c] : counts) words.emplace_back(chars(w), c);

  std::vector<std::pair<std::string, std::string>> merges;
  while (merges.size() < num_merges) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairs;
    for (const auto& [symbols, c] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) pairs[{symbols[i], symbols[i + 1]}] += c;
    const std::pair<std::string, std::string>* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [p, c] : pairs)
      if (c > best_count) {
        best = &p;
        best_count = c;
      }
    if (!best || best_count < std::max<std::size_t>(min_frequency, 1)) break;
    const auto chosen = *best;
    for (auto& [symbols, c] : words) merge_pair(symbols, chosen.first, chosen.second);
    merges.push_back(chosen);
  }
  return BpeVocab(std::move(merges));
}

std::vector<AtomicOp> tokenize(const BpeVocab& vocab, std::span<const std::string> opcodes) {
  std::vector<AtomicOp> out;
  std::map<std::string, std::vector<std::string>, std::less<>> cache;
  for (const auto& m : opcodes) {
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, vocab.split(m)).first;
    for (std::size_t i = 0; i < it->second.size(); ++i) out.push_back({it->second[i], i == 0});
  }
  return out;
}

std::vector<AtomicOp> tokenize(const BpeVocab& vocab, const AssemblyFunction& function) {
  return tokenize(vocab, std::span<const std::string>(function.opcodes));
}

std::vector<std::string> detokenize(std::span<const AtomicOp> ops) {
  std::vector<std::string> out;
  for (const auto& op : ops) {
    if (op.word_start || out.empty())
      out.push_back(op.token);
    else
      out.back() += op.token;
  }
  return out;
}

}  // namespace nnd
