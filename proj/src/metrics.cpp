#include "cctc/metrics.hpp"

#include <set>

namespace cctc {

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& other) {
  substitutions += other.substitutions;
  insertions += other.insertions;
  deletions += other.deletions;
  reference_length += other.reference_length;
  return *this;
}

template <typename Token>
ErrorCounts edit_counts(std::span<const Token> ref, std::span<const Token> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cost[i][j] = std::min({sub, cost[i - 1][j] + 1, cost[i][j - 1] + 1});
    }
  }
  ErrorCounts counts;
  counts.reference_length = static_cast<long>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && cost[i][j] == cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++counts.substitutions;
      --i;
      --j;
    } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

template ErrorCounts edit_counts<std::string>(std::span<const std::string>, std::span<const std::string>);
template ErrorCounts edit_counts<TokenId>(std::span<const TokenId>, std::span<const TokenId>);

ErrorCounts wer(std::span<const std::string> ref_words, std::span<const std::string> hyp_words) {
  return edit_counts(ref_words, hyp_words);
}

ErrorCounts cer(std::span<const TokenId> ref, std::span<const TokenId> hyp) { return edit_counts(ref, hyp); }

std::vector<Transcript> split_word_tokens(std::span<const TokenId> transcript, const Alphabet& alphabet) {
  const auto delim = alphabet.word_delimiter();
  std::vector<Transcript> words;
  Transcript current;
  for (TokenId tok : transcript) {
    if (delim && tok == *delim) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(tok);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<std::string> split_words(std::span<const TokenId> transcript, const Alphabet& alphabet) {
  std::vector<std::string> out;
  for (const auto& w : split_word_tokens(transcript, alphabet)) out.push_back(alphabet.decode(w));
  return out;
}

MixedScriptCount mixed_script_words(std::span<const Transcript> hypotheses, const Alphabet& alphabet) {
  MixedScriptCount count;
  for (const auto& hyp : hypotheses) {
    for (const auto& word : split_word_tokens(hyp, alphabet)) {
      std::set<std::string> scripts;
      for (TokenId tok : word) scripts.insert(alphabet.script(tok));
      ++count.total_words;
      if (scripts.size() >= 2) ++count.mixed_words;
    }
  }
  return count;
}

}  // namespace cctc
