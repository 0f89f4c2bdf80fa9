#pragma once

#include "cctc/common.hpp"

#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cctc {

inline const std::string kSentenceStart = "<s>";
inline const std::string kSentenceEnd = "</s>";
inline const std::string kUnknown = "<unk>";

/// Anything that assigns log P(word | history). Histories are given without
/// the sentence-start marker; implementations add it.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual int order() const = 0;
  virtual double log_prob(std::span<const std::string> history, const std::string& word) const = 0;

  /// Sum of conditional log-probabilities of the tokens followed by </s>.
  double score(std::span<const std::string> tokens) const;
};

struct SmoothingConfig {
  enum class Kind { add_k, stupid_backoff };
  Kind kind = Kind::add_k;
  /// Pseudo-count added to every (context, word) pair. k = 0 is maximum likelihood.
  double k = 0.1;
  /// Multiplier applied per backoff step under stupid backoff.
  double backoff_factor = 0.4;
};

/// Backoff n-gram model with explicit per-n-gram log-probabilities and
/// per-context backoff weights:
///
///   P(w | c) = P*(c w)                 if c w was stored
///            = bow(c) * P(w | c')      otherwise (c' drops the oldest word)
///
/// With add-k smoothing every stored context keeps the add-k estimate for
/// its observed words and hands the remaining mass to the lower order, so
/// each conditional distribution sums to one over the vocabulary. Stupid
/// backoff is unnormalised by construction.
class NgramModel : public LanguageModel {
 public:
  struct Entry {
    double log_prob = 0;
    double log_backoff = 0;
  };
  using Key = std::vector<std::string>;

  static NgramModel train(std::span<const std::vector<std::string>> sentences, int order,
                          const SmoothingConfig& smoothing = {});

  int order() const override { return order_; }
  double log_prob(std::span<const std::string> history, const std::string& word) const override;

  /// Words that can be predicted: training words, </s> and <unk>.
  const std::set<std::string>& vocabulary() const { return vocabulary_; }
  const SmoothingConfig& smoothing() const { return smoothing_; }
  const std::map<Key, Entry>& table(int n) const { return tables_.at(n - 1); }

  /// Sorted text format: a header block followed by one
  /// `logp<TAB>tokens<TAB>backoff` line per n-gram.
  void write(std::ostream& out) const;
  static NgramModel read(std::istream& in);
  void save(const std::string& path) const;
  static NgramModel load(const std::string& path);

  bool operator==(const NgramModel& other) const;

 private:
  double log_prob_in_context(Key context, const std::string& word) const;

  int order_ = 1;
  SmoothingConfig smoothing_;
  std::set<std::string> vocabulary_;
  std::vector<std::map<Key, Entry>> tables_;
};

/// Token-level linear mixture: P(w | h) = sum_i lambda_i P_i(w | h).
class InterpolatedLm : public LanguageModel {
 public:
  InterpolatedLm(std::vector<std::shared_ptr<const LanguageModel>> components, std::vector<double> weights);

  int order() const override;
  double log_prob(std::span<const std::string> history, const std::string& word) const override;
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<std::shared_ptr<const LanguageModel>> components_;
  std::vector<double> weights_;
};

}  // namespace cctc
