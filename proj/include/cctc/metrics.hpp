#pragma once

#include "cctc/path_algebra.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cctc {

struct ErrorCounts {
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;
  long reference_length = 0;

  long errors() const { return substitutions + insertions + deletions; }
  /// (S + I + D) / N; empty when the reference is empty.
  std::optional<double> rate() const {
    if (reference_length == 0) return std::nullopt;
    return static_cast<double>(errors()) / static_cast<double>(reference_length);
  }
  ErrorCounts& operator+=(const ErrorCounts& other);
  bool operator==(const ErrorCounts&) const = default;
};

/// Minimum edit distance alignment counts. Among equal-cost alignments the
/// backtrace prefers a substitution (or match), then a deletion, then an
/// insertion.
template <typename Token>
ErrorCounts edit_counts(std::span<const Token> ref, std::span<const Token> hyp);

ErrorCounts wer(std::span<const std::string> ref_words, std::span<const std::string> hyp_words);
ErrorCounts cer(std::span<const TokenId> ref, std::span<const TokenId> hyp);

/// Splits a transcript on the alphabet's word delimiter. Empty words (from
/// repeated or edge delimiters) are dropped.
std::vector<std::string> split_words(std::span<const TokenId> transcript, const Alphabet& alphabet);
std::vector<Transcript> split_word_tokens(std::span<const TokenId> transcript, const Alphabet& alphabet);

struct MixedScriptCount {
  long mixed_words = 0;
  long total_words = 0;

  double rate() const { return total_words == 0 ? 0.0 : static_cast<double>(mixed_words) / total_words; }
  MixedScriptCount& operator+=(const MixedScriptCount& other) {
    mixed_words += other.mixed_words;
    total_words += other.total_words;
    return *this;
  }
};

/// Words whose characters carry at least two distinct script tags.
MixedScriptCount mixed_script_words(std::span<const Transcript> hypotheses, const Alphabet& alphabet);

inline double mixed_script_rate(std::span<const Transcript> hypotheses, const Alphabet& alphabet) {
  return mixed_script_words(hypotheses, alphabet).rate();
}

}  // namespace cctc
