#pragma once

#include "cctc/common.hpp"
#include "cctc/ngram_lm.hpp"
#include "cctc/path_algebra.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cctc {

enum class DecodeMode { greedy, beam, beam_lm };
enum class LmUnit { word, character };

std::string to_string(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& name);

struct DecodeConfig {
  DecodeMode mode = DecodeMode::greedy;
  int beam_width = 64;
  double lm_weight = 0.5;
  double word_bonus = 0.0;
  LmUnit lm_unit = LmUnit::word;
  std::shared_ptr<const LanguageModel> lm;

  void validate() const;
};

/// `combined = acoustic + lm_weight * lm + word_bonus * word_count`.
struct Hypothesis {
  Transcript transcript;
  double acoustic = 0;
  double lm = 0;
  double combined = 0;
  int word_count = 0;
};

/// Collapse of the frame-wise argmax path (ties to the lowest token id).
Transcript greedy_decode(const Lattice<double>& lattice, TokenId blank);
Transcript greedy_decode(const Lattice<float>& lattice, TokenId blank);

/// CTC prefix beam search. Each prefix carries the log-probability of all
/// surviving paths that end in a blank and of those that end in its last
/// character. At every frame only the `beam_width` most probable tokens of
/// that frame are expanded, so a width of one follows the argmax path and a
/// width of at least |A'| expands every token.
///
/// With an LM, the LM term of a prefix is updated when a word is completed
/// (word LM) or on every character (character LM), and </s> is scored at the
/// end. Hypotheses are ranked by combined score, ties by transcript.
class PrefixBeamSearch {
 public:
  struct Beam {
    Transcript prefix;
    double log_blank = neg_inf<double>();
    double log_nonblank = neg_inf<double>();
    double lm = 0;
    int words = 0;
    // LM history and partially spelled word (word LM only).
    std::vector<std::string> history;
    Transcript partial;

    double acoustic() const { return log_add(log_blank, log_nonblank); }
  };

  PrefixBeamSearch(const Alphabet& alphabet, DecodeConfig config);

  void reset();
  void step(const Eigen::Ref<const Eigen::RowVectorXd>& logp_row);
  const std::vector<Beam>& beams() const { return beams_; }
  /// Applies the end-of-sentence LM terms and ranks the surviving prefixes.
  std::vector<Hypothesis> finish() const;

  std::vector<Hypothesis> search(const Lattice<double>& lattice);

 private:
  double score(const Beam& b) const;
  void extend_lm(Beam& beam, TokenId token) const;

  const Alphabet& alphabet_;
  DecodeConfig config_;
  std::optional<TokenId> delimiter_;
  bool use_lm_ = false;
  std::vector<Beam> beams_;
};

std::vector<Hypothesis> beam_decode(const Lattice<double>& lattice, const Alphabet& alphabet,
                                    const DecodeConfig& config);

/// Greedy or beam decoding per `config.mode`, returning the best transcript.
Transcript decode(const Lattice<double>& lattice, const Alphabet& alphabet, const DecodeConfig& config);

}  // namespace cctc
