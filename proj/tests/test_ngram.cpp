#include "cctc/ngram_lm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

namespace cctc {
namespace {

using Sentences = std::vector<std::vector<std::string>>;

Sentences parse(std::initializer_list<const char*> lines) {
  Sentences out;
  for (const char* line : lines) {
    std::istringstream in(line);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    out.push_back(words);
  }
  return out;
}

const SmoothingConfig kMaxLikelihood{SmoothingConfig::Kind::add_k, 0.0, 0.4};

double prob(const LanguageModel& lm, std::vector<std::string> history, const std::string& w) {
  return std::exp(lm.log_prob(history, w));
}

std::vector<std::string> predictable(const NgramModel& lm) {
  return {lm.vocabulary().begin(), lm.vocabulary().end()};
}

TEST(Ngram, BigramMaximumLikelihood) {
  const auto lm = NgramModel::train(parse({"a b", "a b"}), 2, kMaxLikelihood);
  EXPECT_DOUBLE_EQ(prob(lm, {"a"}, "b"), 1.0);
  EXPECT_DOUBLE_EQ(prob(lm, {}, "a"), 1.0);
  EXPECT_EQ(prob(lm, {"a"}, "a"), 0.0);
}

TEST(Ngram, UnigramCountsIncludeSentenceEnd) {
  const auto lm = NgramModel::train(parse({"a a b"}), 1, kMaxLikelihood);
  // Among words a and b the split is 2:1; </s> takes one of four counts.
  EXPECT_NEAR(prob(lm, {}, "a") / (prob(lm, {}, "a") + prob(lm, {}, "b")), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(prob(lm, {}, "a"), 2.0 / 4.0, 1e-12);
  EXPECT_NEAR(prob(lm, {}, kSentenceEnd), 1.0 / 4.0, 1e-12);
}

TEST(Ngram, AddKBigramByHand) {
  // <s> a b </s> | <s> b </s> | <s> a a </s>; V = {a, b, </s>, <unk>}, k = 0.1.
  const auto lm = NgramModel::train(parse({"a b", "b", "a a"}), 2, {SmoothingConfig::Kind::add_k, 0.1, 0.4});
  const double uni_total = 8 + 0.4;
  EXPECT_NEAR(prob(lm, {"zzz"}, "b"), 2.1 / uni_total, 1e-12);  // unknown history backs off fully
  EXPECT_NEAR(prob(lm, {}, "a"), 2.1 / 3.4, 1e-12);
  EXPECT_NEAR(prob(lm, {}, "b"), 1.1 / 3.4, 1e-12);
  const double bow_start = (0.2 / 3.4) / (1 - (3.1 + 2.1) / uni_total);
  EXPECT_NEAR(prob(lm, {}, kSentenceEnd), bow_start * 3.1 / uni_total, 1e-12);
  EXPECT_NEAR(prob(lm, {}, "qq"), bow_start * 0.1 / uni_total, 1e-12);
  // Context a: followers b (1), a (1), </s> (1).
  EXPECT_NEAR(prob(lm, {"a"}, "b"), 1.1 / 3.4, 1e-12);
  const double bow_a = (0.1 / 3.4) / (1 - (3.1 + 2.1 + 3.1) / uni_total);
  EXPECT_NEAR(prob(lm, {"a"}, kUnknown), bow_a * 0.1 / uni_total, 1e-12);
}

TEST(Ngram, EmptyCorpusAndBadOrderAreErrors) {
  EXPECT_THROW(NgramModel::train(Sentences{}, 2), Error);
  EXPECT_THROW(NgramModel::train(parse({"a"}), 0), Error);
}

TEST(NgramProperty, ConditionalsSumToOne) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> words{"a", "b", "c", "d", "e"};
  std::uniform_int_distribution<int> pick(0, 4), len(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    Sentences corpus(10);
    for (auto& s : corpus) {
      for (int i = len(rng); i > 0; --i) s.push_back(words[pick(rng)]);
    }
    const double k = trial % 2 ? 0.5 : 0.05;
    const auto lm = NgramModel::train(corpus, 3, {SmoothingConfig::Kind::add_k, k, 0.4});
    const auto vocab = predictable(lm);
    for (int c = 0; c < 30; ++c) {
      std::vector<std::string> history;
      for (int i = len(rng) % 3; i > 0; --i) history.push_back(c % 7 == 0 ? "unseen" : words[pick(rng)]);
      double total = 0;
      for (const auto& w : vocab) total += prob(lm, history, w);
      ASSERT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(NgramProperty, SentencesUpToLengthTwoCarryAllMass) {
  // Every sentence is a single word, so maximum likelihood puts all mass on length 1.
  const auto lm = NgramModel::train(parse({"a", "b"}), 2, kMaxLikelihood);
  std::vector<std::string> words;
  for (const auto& w : lm.vocabulary()) {
    if (w != kSentenceEnd) words.push_back(w);
  }
  double total = std::exp(lm.score(std::vector<std::string>{}));
  for (const auto& w1 : words) {
    total += std::exp(lm.score(std::vector<std::string>{w1}));
    for (const auto& w2 : words) total += std::exp(lm.score(std::vector<std::string>{w1, w2}));
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(NgramProperty, EndedSentencesPlusOpenPrefixesSumToOne) {
  const auto lm = NgramModel::train(parse({"a b", "b b a", "a"}), 2, {SmoothingConfig::Kind::add_k, 0.2, 0.4});
  std::vector<std::string> words;
  for (const auto& w : lm.vocabulary()) {
    if (w != kSentenceEnd) words.push_back(w);
  }
  auto prefix = [&](const std::vector<std::string>& s) {
    double lp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      lp += lm.log_prob(std::span(s).first(i), s[i]);
    }
    return std::exp(lp);
  };
  double total = std::exp(lm.score(std::vector<std::string>{}));
  for (const auto& w1 : words) {
    total += std::exp(lm.score(std::vector<std::string>{w1}));
    for (const auto& w2 : words) {
      total += std::exp(lm.score(std::vector<std::string>{w1, w2}));
      for (const auto& w3 : words) total += prefix({w1, w2, w3});
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Ngram, StupidBackoffScalesLowerOrder) {
  const auto lm = NgramModel::train(parse({"a b", "a c"}), 2, {SmoothingConfig::Kind::stupid_backoff, 0.0, 0.4});
  EXPECT_NEAR(prob(lm, {"a"}, "b"), 0.5, 1e-12);
  EXPECT_NEAR(prob(lm, {"a"}, "a"), 0.4 * prob(lm, {"zzz"}, "a"), 1e-12);
}

TEST(Ngram, FileRoundTrip) {
  const auto lm = NgramModel::train(parse({"a b c", "b c", "c a a"}), 3);
  std::stringstream buf;
  lm.write(buf);
  const auto back = NgramModel::read(buf);
  EXPECT_TRUE(back == lm);
  for (const auto& w : predictable(lm)) {
    EXPECT_EQ(back.log_prob(std::vector<std::string>{"b", "c"}, w), lm.log_prob(std::vector<std::string>{"b", "c"}, w));
  }
  std::istringstream bad("#ngram-lm 2\n");
  EXPECT_THROW(NgramModel::read(bad), Error);
}

TEST(InterpolatedLm, DegenerateWeightsSelectAComponent) {
  auto big = std::make_shared<NgramModel>(NgramModel::train(parse({"a b", "b a b"}), 2));
  auto uni = std::make_shared<NgramModel>(NgramModel::train(parse({"a a a b"}), 1));
  const InterpolatedLm mix({big, uni}, {1.0, 0.0});
  for (const auto& w : predictable(*big)) {
    EXPECT_NEAR(mix.log_prob(std::vector<std::string>{"a"}, w), big->log_prob(std::vector<std::string>{"a"}, w), 1e-12);
  }
  EXPECT_EQ(mix.order(), 2);
}

TEST(InterpolatedLm, MixtureLiesBetweenComponents) {
  auto big = std::make_shared<NgramModel>(NgramModel::train(parse({"a b", "b a b"}), 2));
  auto uni = std::make_shared<NgramModel>(NgramModel::train(parse({"a a a b"}), 1));
  const InterpolatedLm mix({big, uni}, {0.3, 0.7});
  for (const auto& w : predictable(*big)) {
    const std::vector<std::string> h{"b"};
    const double p = prob(mix, h, w);
    EXPECT_NEAR(p, 0.3 * prob(*big, h, w) + 0.7 * prob(*uni, h, w), 1e-12);
    EXPECT_GE(p, std::min(prob(*big, h, w), prob(*uni, h, w)) - 1e-15);
    EXPECT_LE(p, std::max(prob(*big, h, w), prob(*uni, h, w)) + 1e-15);
  }
}

TEST(InterpolatedLm, RejectsBadWeights) {
  auto uni = std::make_shared<NgramModel>(NgramModel::train(parse({"a"}), 1));
  EXPECT_THROW(InterpolatedLm({uni, uni}, {0.5, 0.6}), Error);
  EXPECT_THROW(InterpolatedLm({uni, uni}, {1.5, -0.5}), Error);
  EXPECT_THROW(InterpolatedLm({uni}, {0.5, 0.5}), Error);
}

}  // namespace
}  // namespace cctc
