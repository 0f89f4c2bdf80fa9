#include "cctc/decoder.hpp"

#include <algorithm>
#include <numeric>

namespace cctc {

std::string to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::greedy:
      return "greedy";
    case DecodeMode::beam:
      return "beam";
    case DecodeMode::beam_lm:
      return "beam+lm";
  }
  return "greedy";
}

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "greedy" || name == "argmax") return DecodeMode::greedy;
  if (name == "beam") return DecodeMode::beam;
  if (name == "beam+lm" || name == "beam_lm" || name == "lm") return DecodeMode::beam_lm;
  throw Error("unknown decode mode: " + name);
}

void DecodeConfig::validate() const {
  if (beam_width < 1) throw Error("beam width must be >= 1");
  if (!std::isfinite(lm_weight) || !std::isfinite(word_bonus)) throw Error("decode weights must be finite");
  if (mode == DecodeMode::beam_lm && !lm) throw Error("beam+lm decoding needs a language model");
}

namespace {

template <typename Scalar>
Transcript greedy_impl(const Lattice<Scalar>& lattice, TokenId blank) {
  Path path(lattice.rows());
  for (Eigen::Index t = 0; t < lattice.rows(); ++t) path[t] = static_cast<TokenId>(argmax(lattice.row(t)));
  return collapse(path, blank);
}

}  // namespace

Transcript greedy_decode(const Lattice<double>& lattice, TokenId blank) { return greedy_impl(lattice, blank); }
Transcript greedy_decode(const Lattice<float>& lattice, TokenId blank) { return greedy_impl(lattice, blank); }

PrefixBeamSearch::PrefixBeamSearch(const Alphabet& alphabet, DecodeConfig config)
    : alphabet_(alphabet), config_(std::move(config)), delimiter_(alphabet.word_delimiter()) {
  config_.validate();
  use_lm_ = config_.mode == DecodeMode::beam_lm;
  reset();
}

void PrefixBeamSearch::reset() {
  Beam root;
  root.log_blank = 0;
  beams_.assign(1, root);
}

double PrefixBeamSearch::score(const Beam& b) const {
  return b.acoustic() + (use_lm_ ? config_.lm_weight * b.lm : 0.0) + config_.word_bonus * b.words;
}

void PrefixBeamSearch::extend_lm(Beam& beam, TokenId token) const {
  const bool is_delim = delimiter_ && token == *delimiter_;
  if (!is_delim && (beam.prefix.empty() || (delimiter_ && beam.prefix.back() == *delimiter_))) ++beam.words;
  beam.prefix.push_back(token);
  if (!use_lm_) return;
  if (config_.lm_unit == LmUnit::character) {
    const std::string& sym = alphabet_.symbol(token);
    beam.lm += config_.lm->log_prob(beam.history, sym);
    beam.history.push_back(sym);
    const auto keep = static_cast<std::size_t>(std::max(config_.lm->order() - 1, 0));
    if (beam.history.size() > keep) beam.history.erase(beam.history.begin(), beam.history.end() - keep);
    return;
  }
  if (!is_delim) {
    beam.partial.push_back(token);
    return;
  }
  if (beam.partial.empty()) return;
  const std::string word = alphabet_.decode(beam.partial);
  beam.lm += config_.lm->log_prob(beam.history, word);
  beam.history.push_back(word);
  beam.partial.clear();
  const auto keep = static_cast<std::size_t>(std::max(config_.lm->order() - 1, 0));
  if (beam.history.size() > keep) beam.history.erase(beam.history.begin(), beam.history.end() - keep);
}

void PrefixBeamSearch::step(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const int V = static_cast<int>(row.size());
  if (V != alphabet_.augmented_size()) throw Error("lattice width does not match alphabet");
  const TokenId blank = alphabet_.blank();

  std::vector<int> tokens(V);
  std::iota(tokens.begin(), tokens.end(), 0);
  const int keep_tokens = std::min(V, config_.beam_width);
  std::partial_sort(tokens.begin(), tokens.begin() + keep_tokens, tokens.end(), [&row](int a, int b) {
    return row(a) > row(b) || (row(a) == row(b) && a < b);
  });
  tokens.resize(keep_tokens);

  std::map<Transcript, Beam> next;
  auto entry = [&next](const Beam& source) -> Beam& {
    auto [it, inserted] = next.try_emplace(source.prefix);
    if (inserted) {
      it->second = source;
      it->second.log_blank = neg_inf<double>();
      it->second.log_nonblank = neg_inf<double>();
    }
    return it->second;
  };
  auto extended = [&](const Beam& source, TokenId tok) -> Beam& {
    Transcript key = source.prefix;
    key.push_back(tok);
    auto it = next.find(key);
    if (it != next.end()) return it->second;
    Beam b = source;
    b.log_blank = neg_inf<double>();
    b.log_nonblank = neg_inf<double>();
    extend_lm(b, tok);
    return next.emplace(std::move(key), std::move(b)).first->second;
  };

  for (const Beam& b : beams_) {
    const double total = b.acoustic();
    for (int tok : tokens) {
      const double p = row(tok);
      if (p == neg_inf<double>()) continue;
      if (tok == blank) {
        Beam& same = entry(b);
        same.log_blank = log_add(same.log_blank, total + p);
      } else if (!b.prefix.empty() && tok == b.prefix.back()) {
        if (b.log_nonblank != neg_inf<double>()) {
          Beam& same = entry(b);
          same.log_nonblank = log_add(same.log_nonblank, b.log_nonblank + p);
        }
        if (b.log_blank != neg_inf<double>()) {
          Beam& ext = extended(b, tok);
          ext.log_nonblank = log_add(ext.log_nonblank, b.log_blank + p);
        }
      } else {
        Beam& ext = extended(b, tok);
        ext.log_nonblank = log_add(ext.log_nonblank, total + p);
      }
    }
  }

  std::vector<Beam> candidates;
  candidates.reserve(next.size());
  for (auto& [prefix, beam] : next) {
    if (beam.acoustic() != neg_inf<double>()) candidates.push_back(std::move(beam));
  }
  const auto width = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(config_.beam_width));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(width), candidates.end(),
                    [this](const Beam& a, const Beam& b) {
                      const double sa = score(a), sb = score(b);
                      return sa > sb || (sa == sb && a.prefix < b.prefix);
                    });
  candidates.resize(width);
  beams_ = std::move(candidates);
}

std::vector<Hypothesis> PrefixBeamSearch::finish() const {
  std::vector<Hypothesis> out;
  for (const Beam& b : beams_) {
    Hypothesis h;
    h.transcript = b.prefix;
    h.acoustic = b.acoustic();
    h.word_count = b.words;
    if (use_lm_) {
      double lm = b.lm;
      std::vector<std::string> history = b.history;
      if (config_.lm_unit == LmUnit::word && !b.partial.empty()) {
        const std::string word = alphabet_.decode(b.partial);
        lm += config_.lm->log_prob(history, word);
        history.push_back(word);
      }
      lm += config_.lm->log_prob(history, kSentenceEnd);
      h.lm = lm;
    }
    h.combined = h.acoustic + config_.lm_weight * h.lm + config_.word_bonus * h.word_count;
    out.push_back(std::move(h));
  }
  std::sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return a.combined > b.combined || (a.combined == b.combined && a.transcript < b.transcript);
  });
  return out;
}

std::vector<Hypothesis> PrefixBeamSearch::search(const Lattice<double>& lattice) {
  reset();
  for (Eigen::Index t = 0; t < lattice.rows(); ++t) step(lattice.row(t));
  return finish();
}

std::vector<Hypothesis> beam_decode(const Lattice<double>& lattice, const Alphabet& alphabet,
                                    const DecodeConfig& config) {
  PrefixBeamSearch search(alphabet, config);
  return search.search(lattice);
}

Transcript decode(const Lattice<double>& lattice, const Alphabet& alphabet, const DecodeConfig& config) {
  if (config.mode == DecodeMode::greedy) return greedy_decode(lattice, alphabet.blank());
  auto hyps = beam_decode(lattice, alphabet, config);
  return hyps.empty() ? Transcript{} : hyps.front().transcript;
}

}  // namespace cctc
