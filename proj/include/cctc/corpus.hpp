#pragma once

#include "cctc/common.hpp"
#include "cctc/path_algebra.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cctc {

/// Parameters of the two-language synthetic corpus.
///
/// Every character has a prototype feature vector; an utterance emits each
/// character (word delimiters included) for a random number of frames as
/// prototype + N(0, noise^2). Second-language prototypes are pulled toward
/// the prototype of a paired first-language character by `confusability`
/// (0 = unrelated, 1 = identical), which models cross-script acoustic
/// similarity.
struct SyntheticSpec {
  std::string l1_symbols = "abcdefghijklmnop";
  std::string l2_symbols = "αβγδεζηθικλμ";
  std::string l1_script = "L1";
  std::string l2_script = "L2";
  int l1_lexicon_size = 300;
  int l2_lexicon_size = 60;
  int min_word_length = 2;
  int max_word_length = 6;
  int min_words = 2;
  int max_words = 6;
  /// Fraction of utterances that contain second-language words.
  double code_switch_prob = 0.05;
  int min_switched_words = 1;
  int max_switched_words = 2;
  int min_frames_per_char = 2;
  int max_frames_per_char = 5;
  int feature_dim = 16;
  double noise = 0.5;
  double confusability = 0.0;
  int train_size = 2000;
  int dev_size = 300;
  int test_size = 300;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Utterance {
  std::string id;
  Matrix<float> features;  // frames x feature_dim
  Transcript transcript;
  bool code_switched = false;
};

using Dataset = std::vector<Utterance>;

struct Corpus {
  Alphabet alphabet;
  Dataset train;
  Dataset dev;
  Dataset test;

  const Dataset& split(const std::string& name) const;
};

/// True when the transcript holds characters from at least two scripts
/// (the delimiter does not count).
bool is_code_switched(std::span<const TokenId> transcript, const Alphabet& alphabet);

/// Alphabet of a spec: space (script "space"), then L1, then L2 characters.
Alphabet synthetic_alphabet(const SyntheticSpec& spec);

/// Deterministic in `spec.seed`. Each split holds exactly
/// round(code_switch_prob * size) code-switched utterances.
Corpus generate(const SyntheticSpec& spec);

/// Writes `alphabet.txt`, one `<split>.tsv` manifest per split and a
/// `feats/` directory of per-utterance feature files.
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

/// Manifest records: `id<TAB>feature_path<TAB>transcript`; feature paths are
/// relative to the manifest's directory.
void save_manifest(const Dataset& data, const Alphabet& alphabet, const std::string& dir, const std::string& split);
Dataset load_manifest(const std::string& manifest_path, const Alphabet& alphabet);

/// Raw little-endian float32 with an int32 (rows, cols) header.
void write_features(const std::string& path, const Matrix<float>& features);
Matrix<float> read_features(const std::string& path);

}  // namespace cctc
