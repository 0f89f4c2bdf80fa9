#include "cctc/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace cctc {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  const auto l1 = utf8_split(l1_symbols);
  const auto l2 = utf8_split(l2_symbols);
  if (l1.empty() || l2.empty()) throw Error("both scripts need at least one character");
  std::set<std::string> seen;
  for (const auto& c : l1) seen.insert(c);
  for (const auto& c : l2) {
    if (seen.count(c)) throw Error("scripts must be disjoint");
  }
  if (seen.count(" ")) throw Error("the space is reserved as the word delimiter");
  if (l1_script == l2_script) throw Error("script tags must differ");
  if (!(code_switch_prob >= 0 && code_switch_prob <= 1)) throw Error("code_switch_prob must be in [0, 1]");
  if (!(noise >= 0)) throw Error("noise must be non-negative");
  if (!(confusability >= 0 && confusability <= 1)) throw Error("confusability must be in [0, 1]");
  if (min_word_length < 1 || max_word_length < min_word_length) throw Error("invalid word length range");
  if (min_words < 1 || max_words < min_words) throw Error("invalid words-per-utterance range");
  if (min_switched_words < 1 || max_switched_words < min_switched_words) throw Error("invalid switched word range");
  if (min_frames_per_char < 1 || max_frames_per_char < min_frames_per_char) throw Error("invalid frame range");
  if (feature_dim < 1) throw Error("feature_dim must be positive");
  if (l1_lexicon_size < 1 || l2_lexicon_size < 1) throw Error("lexicon sizes must be positive");
  if (train_size < 0 || dev_size < 0 || test_size < 0) throw Error("split sizes must be non-negative");
}

const Dataset& Corpus::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw Error("unknown split: " + name);
}

bool is_code_switched(std::span<const TokenId> transcript, const Alphabet& alphabet) {
  const auto delim = alphabet.word_delimiter();
  std::set<std::string> scripts;
  for (TokenId tok : transcript) {
    if (delim && tok == *delim) continue;
    scripts.insert(alphabet.script(tok));
  }
  return scripts.size() >= 2;
}

Alphabet synthetic_alphabet(const SyntheticSpec& spec) {
  std::vector<Alphabet::Entry> entries{{" ", "space"}};
  for (const auto& c : utf8_split(spec.l1_symbols)) entries.push_back({c, spec.l1_script});
  for (const auto& c : utf8_split(spec.l2_symbols)) entries.push_back({c, spec.l2_script});
  return Alphabet(std::move(entries));
}

namespace {

std::vector<Transcript> make_lexicon(std::mt19937_64& rng, const std::vector<TokenId>& chars, int size,
                                     const SyntheticSpec& spec) {
  std::uniform_int_distribution<int> length(spec.min_word_length, spec.max_word_length);
  std::uniform_int_distribution<std::size_t> pick(0, chars.size() - 1);
  std::set<Transcript> seen;
  std::vector<Transcript> words;
  int attempts = 0;
  while (static_cast<int>(words.size()) < size) {
    if (++attempts > 100 * size) throw Error("cannot draw enough distinct lexicon words");
    Transcript w(length(rng));
    for (auto& c : w) c = chars[pick(rng)];
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

// Zipf-like rank weights so that a word LM has something to learn.
std::discrete_distribution<std::size_t> zipf(std::size_t n) {
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
  return {weights.begin(), weights.end()};
}

}  // namespace

Corpus generate(const SyntheticSpec& spec) {
  spec.validate();
  Corpus corpus;
  corpus.alphabet = synthetic_alphabet(spec);
  const Alphabet& alphabet = corpus.alphabet;
  const TokenId space = *alphabet.word_delimiter();

  std::vector<TokenId> l1_chars, l2_chars;
  for (const auto& c : utf8_split(spec.l1_symbols)) l1_chars.push_back(*alphabet.find(c));
  for (const auto& c : utf8_split(spec.l2_symbols)) l2_chars.push_back(*alphabet.find(c));

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Prototypes indexed by token id; row 0 (blank) is unused.
  Matrix<double> prototypes(alphabet.augmented_size(), spec.feature_dim);
  for (Eigen::Index r = 0; r < prototypes.rows(); ++r) {
    for (Eigen::Index c = 0; c < prototypes.cols(); ++c) prototypes(r, c) = normal(rng);
  }
  const double keep = std::sqrt(1.0 - spec.confusability * spec.confusability);
  for (std::size_t j = 0; j < l2_chars.size(); ++j) {
    const TokenId pair = l1_chars[j % l1_chars.size()];
    prototypes.row(l2_chars[j]) = spec.confusability * prototypes.row(pair) + keep * prototypes.row(l2_chars[j]);
  }

  const auto l1_lexicon = make_lexicon(rng, l1_chars, spec.l1_lexicon_size, spec);
  const auto l2_lexicon = make_lexicon(rng, l2_chars, spec.l2_lexicon_size, spec);
  auto l1_word = zipf(l1_lexicon.size());
  auto l2_word = zipf(l2_lexicon.size());
  std::uniform_int_distribution<int> word_count(spec.min_words, spec.max_words);
  std::uniform_int_distribution<int> switched_count(spec.min_switched_words, spec.max_switched_words);
  std::uniform_int_distribution<int> frames(spec.min_frames_per_char, spec.max_frames_per_char);

  auto make_split = [&](const std::string& name, int size) {
    const auto n_cs = static_cast<int>(std::lround(spec.code_switch_prob * size));
    std::vector<char> cs_flags(size, 0);
    std::fill(cs_flags.begin(), cs_flags.begin() + n_cs, 1);
    std::shuffle(cs_flags.begin(), cs_flags.end(), rng);

    Dataset data;
    data.reserve(size);
    for (int i = 0; i < size; ++i) {
      // A code-switched utterance keeps at least one word of each language.
      const int n_words = cs_flags[i] ? std::max(word_count(rng), 2) : word_count(rng);
      std::vector<Transcript> words;
      for (int w = 0; w < n_words; ++w) words.push_back(l1_lexicon[l1_word(rng)]);
      if (cs_flags[i]) {
        const int n_switch = std::min(switched_count(rng), n_words - 1);
        std::vector<int> positions(n_words);
        for (int w = 0; w < n_words; ++w) positions[w] = w;
        std::shuffle(positions.begin(), positions.end(), rng);
        for (int s = 0; s < n_switch; ++s) words[positions[s]] = l2_lexicon[l2_word(rng)];
      }
      Utterance utt;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%05d", name.c_str(), i);
      utt.id = id;
      for (std::size_t w = 0; w < words.size(); ++w) {
        if (w) utt.transcript.push_back(space);
        utt.transcript.insert(utt.transcript.end(), words[w].begin(), words[w].end());
      }
      std::vector<int> durations;
      int total = 0;
      for (std::size_t c = 0; c < utt.transcript.size(); ++c) {
        durations.push_back(frames(rng));
        total += durations.back();
      }
      utt.features.resize(total, spec.feature_dim);
      int row = 0;
      for (std::size_t c = 0; c < utt.transcript.size(); ++c) {
        for (int f = 0; f < durations[c]; ++f, ++row) {
          for (int d = 0; d < spec.feature_dim; ++d) {
            utt.features(row, d) = static_cast<float>(prototypes(utt.transcript[c], d) + spec.noise * normal(rng));
          }
        }
      }
      utt.code_switched = is_code_switched(utt.transcript, alphabet);
      data.push_back(std::move(utt));
    }
    return data;
  };
  corpus.train = make_split("train", spec.train_size);
  corpus.dev = make_split("dev", spec.dev_size);
  corpus.test = make_split("test", spec.test_size);
  return corpus;
}

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

void write_features(const std::string& path, const Matrix<float>& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::int32_t shape[2] = {static_cast<std::int32_t>(features.rows()), static_cast<std::int32_t>(features.cols())};
  out.write(reinterpret_cast<const char*>(shape), sizeof shape);
  // Row-major payload: frame after frame.
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = features;
  out.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(float)));
  if (!out) throw Error("cannot write " + path);
}

Matrix<float> read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::int32_t shape[2] = {0, 0};
  in.read(reinterpret_cast<char*>(shape), sizeof shape);
  if (!in || shape[0] < 0 || shape[1] < 0) throw Error("bad feature header in " + path);
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(shape[0], shape[1]);
  in.read(reinterpret_cast<char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(float)));
  if (!in) throw Error("truncated feature file " + path);
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes in feature file " + path);
  return rows;
}

void save_manifest(const Dataset& data, const Alphabet& alphabet, const std::string& dir, const std::string& split) {
  fs::create_directories(fs::path(dir) / "feats");
  std::ofstream manifest(fs::path(dir) / (split + ".tsv"));
  if (!manifest) throw Error("cannot write manifest in " + dir);
  for (const auto& utt : data) {
    const std::string rel = "feats/" + utt.id + ".f32";
    write_features((fs::path(dir) / rel).string(), utt.features);
    manifest << utt.id << '\t' << rel << '\t' << alphabet.decode(utt.transcript) << '\n';
  }
  if (!manifest) throw Error("cannot write manifest in " + dir);
}

Dataset load_manifest(const std::string& manifest_path, const Alphabet& alphabet) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot read " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  Dataset data;
  std::unordered_set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos ||
        t1 == 0 || t2 == t1 + 1) {
      throw Error("malformed manifest line " + std::to_string(line_no) + " in " + manifest_path);
    }
    Utterance utt;
    utt.id = line.substr(0, t1);
    if (!ids.insert(utt.id).second) {
      throw Error("duplicate utterance id " + utt.id + " at manifest line " + std::to_string(line_no));
    }
    const fs::path feats = base / line.substr(t1 + 1, t2 - t1 - 1);
    if (!fs::exists(feats)) throw Error("missing feature file for utterance " + utt.id);
    utt.features = read_features(feats.string());
    try {
      utt.transcript = alphabet.encode(line.substr(t2 + 1));
    } catch (const Error& e) {
      throw Error("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    utt.code_switched = is_code_switched(utt.transcript, alphabet);
    data.push_back(std::move(utt));
  }
  return data;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  corpus.alphabet.save((fs::path(dir) / "alphabet.txt").string());
  save_manifest(corpus.train, corpus.alphabet, dir, "train");
  save_manifest(corpus.dev, corpus.alphabet, dir, "dev");
  save_manifest(corpus.test, corpus.alphabet, dir, "test");
}

Corpus load_corpus(const std::string& dir) {
  Corpus corpus;
  corpus.alphabet = Alphabet::load((fs::path(dir) / "alphabet.txt").string());
  auto load_split = [&](const std::string& name) {
    const auto path = fs::path(dir) / (name + ".tsv");
    return fs::exists(path) ? load_manifest(path.string(), corpus.alphabet) : Dataset{};
  };
  corpus.train = load_split("train");
  corpus.dev = load_split("dev");
  corpus.test = load_split("test");
  std::unordered_set<std::string> ids;
  for (const Dataset* split : {&corpus.train, &corpus.dev, &corpus.test}) {
    for (const auto& utt : *split) {
      if (!ids.insert(utt.id).second) throw Error("utterance id " + utt.id + " appears in two splits");
    }
  }
  return corpus;
}

}  // namespace cctc
