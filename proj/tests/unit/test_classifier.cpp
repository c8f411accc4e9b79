// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "nndecomp/bpe.hpp"
#include "nndecomp/classifier.hpp"
#include "nndecomp/error.hpp"
#include "nndecomp/harness.hpp"
#include "support.hpp"

using namespace nnd;
using nnd::testing::kAllStyles;
using nnd::testing::TempDir;

namespace {

const LabeledCorpus& small_corpus() {
  static const LabeledCorpus c =
      emit_corpus(models::corpus_suite(16, 9), {std::begin(kAllStyles), std::end(kAllStyles)}, 9);
  return c;
}

const Classifier& small_classifier() {
  static const Classifier c = train_classifier(small_corpus());
  return c;
}

std::pair<std::string, std::string> most_frequent_pair(const std::vector<std::string>& words) {
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& w : words)
    for (std::size_t i = 0; i + 1 < w.size(); ++i) ++counts[{w.substr(i, 1), w.substr(i + 1, 1)}];
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

}  // namespace

TEST_CASE("bpe: first merge is the most frequent adjacent pair") {
  const std::vector<std::string> words = {"vmulss", "vaddss", "vmovss", "vsubss", "addss", "mulss"};
  const BpeVocab v = train_bpe(words, 10);
  REQUIRE_FALSE(v.merges().empty());
  CHECK(v.merges().front() == most_frequent_pair(words));
}

TEST_CASE("bpe: merges stop below the minimum frequency") {
  const std::vector<std::string> words = {"abc", "def", "ghi"};
  CHECK(train_bpe(words, 10).merges().empty());
  CHECK_FALSE(train_bpe(words, 10, 1).merges().empty());
}

TEST_CASE("bpe: splitting and tokenizing are lossless") {
  std::vector<std::string> ops;
  for (const auto& it : small_corpus().items)
    ops.insert(ops.end(), it.function.opcodes.begin(), it.function.opcodes.end());
  const BpeVocab v = train_bpe(ops, 200);
  for (const std::string m : {"vfmadd231ps", "vbroadcastss", "mov", "x", "cvttss2si"}) {
    const auto parts = v.split(m);
    CHECK(std::accumulate(parts.begin(), parts.end(), std::string()) == m);
  }
  const auto& f = small_corpus().items.front().function;
  CHECK(detokenize(tokenize(v, f)) == f.opcodes);
}

TEST_CASE("bpe: vocabulary serialization round trip") {
  const BpeVocab v = train_bpe(std::vector<std::string>{"vmulss", "vaddss", "vmovss", "vmovaps"}, 20);
  std::stringstream s;
  v.write(s);
  const BpeVocab back = BpeVocab::read(s);
  CHECK(back == v);
  CHECK(back.split("vmovss") == v.split("vmovss"));
}

TEST_CASE("features are L2 normalised and deterministic") {
  const auto& f = small_corpus().items.front().function;
  const auto ops = tokenize(small_classifier().vocab(), f);
  const Features a = featurize(ops), b = featurize(ops);
  CHECK(a == b);
  double norm = 0;
  for (const auto& [i, v] : a) {
    CHECK(i < kFeatureDim);
    norm += double(v) * v;
  }
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(featurize({}).empty());
}

TEST_CASE("label vectors") {
  const auto l = OperatorLabelVec::from_kinds({OpKind::ReLU, OpKind::Conv, OpKind::BiasAdd});
  CHECK(l.kinds() == std::vector<OpKind>{OpKind::Conv, OpKind::BiasAdd, OpKind::ReLU});
  CHECK(l.str() == "Conv+BiasAdd+ReLU");
  CHECK_FALSE(l.needs_review());
  CHECK(OperatorLabelVec{}.is_utility());
  CHECK(OperatorLabelVec{}.str() == "utility");

  OperatorLabelVec low = l;
  for (auto& c : low.confidences) c = 0.79;
  CHECK(low.needs_review());
  low.confidences[*label_index(OpKind::Conv)] = kReviewConfidence;
  CHECK_FALSE(low.needs_review());
}

TEST_CASE("training needs at least two examples per seen label") {
  CHECK_THROWS_AS(train_classifier(LabeledCorpus{}), Error);
  LabeledCorpus c;
  for (const auto& it : small_corpus().items)
    if (!it.labels.empty() && it.labels.front() == OpKind::Conv) c.items.push_back(it);
  REQUIRE(c.items.size() > 2);
  LabeledFunction lone = c.items.front();
  lone.labels = {OpKind::Softmax};
  c.items.push_back(lone);
  try {
    (void)train_classifier(c);
    FAIL("expected InsufficientLabels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientLabels);
  }
}

TEST_CASE("classifier fits its training corpus and predicts provenance") {
  const Classifier& c = small_classifier();
  std::size_t exact = 0;
  std::map<std::string, TraceBundle> bundles;
  std::map<std::string, Style> truth;
  for (const auto& it : small_corpus().items) {
    exact += c.classify(it.function).kinds() == OperatorLabelVec::from_kinds(it.labels).kinds();
    const std::string key = it.origin + style_name(it.provenance);
    bundles[key].functions.push_back(it.function);
    truth[key] = it.provenance;
  }
  CHECK(double(exact) / double(small_corpus().items.size()) >= 0.95);
  for (const auto& [key, b] : bundles) CHECK_MESSAGE(c.predict_provenance(b) == truth[key], key);
  const auto p = c.provenance_probs(small_corpus().items.front().function);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("training is deterministic and the model file round trips") {
  const Classifier again = train_classifier(small_corpus());
  CHECK(again == small_classifier());
  TempDir d("clf");
  small_classifier().save(d / "m.bin");
  const Classifier back = Classifier::load(d / "m.bin");
  CHECK(back == small_classifier());
  const auto& f = small_corpus().items[7].function;
  CHECK(back.classify(f) == small_classifier().classify(f));

  std::ofstream(d / "junk.bin") << "not a model";
  CHECK_THROWS_AS((void)Classifier::load(d / "junk.bin"), Error);
  CHECK_THROWS_AS((void)Classifier::load(d / "absent.bin"), Error);
}
