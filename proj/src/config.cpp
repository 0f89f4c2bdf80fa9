#include "cctc/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace cctc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  if (!(in >> value) || !(in >> std::ws).eof()) throw Error("bad value for " + key + ": " + text);
  return value;
}

using Setter = std::function<void(const std::string&)>;

void apply_section(const ConfigFile& file, const std::string& section, const std::map<std::string, Setter>& setters) {
  const std::string prefix = section + ".";
  for (const auto& [key, value] : file.values()) {
    if (key.rfind(prefix, 0) != 0) continue;
    const auto name = key.substr(prefix.size());
    auto it = setters.find(name);
    if (it == setters.end()) throw Error("unknown config key: " + key);
    it->second(value);
  }
}

template <typename T>
Setter bind(const std::string& key, T& target) {
  return [key, &target](const std::string& v) { target = parse_value<T>(key, v); };
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in) {
  ConfigFile file;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error("malformed section header at config line " + std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw Error("malformed config line " + std::to_string(line_no));
    }
    file.values_[section + "." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return file;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return parse(in);
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void apply(const ConfigFile& file, SyntheticSpec& s) {
  std::uint64_t seed = s.seed;
  apply_section(file, "corpus",
                {{"l1_symbols", [&s](const std::string& v) { s.l1_symbols = v; }},
                 {"l2_symbols", [&s](const std::string& v) { s.l2_symbols = v; }},
                 {"l1_script", [&s](const std::string& v) { s.l1_script = v; }},
                 {"l2_script", [&s](const std::string& v) { s.l2_script = v; }},
                 {"l1_lexicon_size", bind("l1_lexicon_size", s.l1_lexicon_size)},
                 {"l2_lexicon_size", bind("l2_lexicon_size", s.l2_lexicon_size)},
                 {"min_word_length", bind("min_word_length", s.min_word_length)},
                 {"max_word_length", bind("max_word_length", s.max_word_length)},
                 {"min_words", bind("min_words", s.min_words)},
                 {"max_words", bind("max_words", s.max_words)},
                 {"code_switch_prob", bind("code_switch_prob", s.code_switch_prob)},
                 {"min_switched_words", bind("min_switched_words", s.min_switched_words)},
                 {"max_switched_words", bind("max_switched_words", s.max_switched_words)},
                 {"min_frames_per_char", bind("min_frames_per_char", s.min_frames_per_char)},
                 {"max_frames_per_char", bind("max_frames_per_char", s.max_frames_per_char)},
                 {"feature_dim", bind("feature_dim", s.feature_dim)},
                 {"noise", bind("noise", s.noise)},
                 {"confusability", bind("confusability", s.confusability)},
                 {"train_size", bind("train_size", s.train_size)},
                 {"dev_size", bind("dev_size", s.dev_size)},
                 {"test_size", bind("test_size", s.test_size)},
                 {"seed", bind("seed", seed)}});
  s.seed = seed;
}

void apply(const ConfigFile& file, ModelConfig& c) {
  apply_section(file, "model",
                {{"conv", [&c](const std::string& v) { c.conv_layers = ModelConfig::parse_conv_string(v); }},
                 {"activation", [&c](const std::string& v) { c.activation = parse_activation(v); }},
                 {"context_size", bind("context_size", c.context_size)}});
}

void apply(const ConfigFile& file, TrainConfig& c) {
  apply_section(file, "train",
                {{"ctc_epochs", bind("ctc_epochs", c.ctc_epochs)},
                 {"cctc_epochs", bind("cctc_epochs", c.cctc_epochs)},
                 {"batch_size", bind("batch_size", c.batch_size)},
                 {"lr", bind("lr", c.lr)},
                 {"lr_decay", bind("lr_decay", c.lr_decay)},
                 {"adam_beta1", bind("adam_beta1", c.adam_beta1)},
                 {"adam_beta2", bind("adam_beta2", c.adam_beta2)},
                 {"adam_eps", bind("adam_eps", c.adam_eps)},
                 {"alpha", bind("alpha", c.alpha)},
                 {"beta", bind("beta", c.beta)},
                 {"eval_every", bind("eval_every", c.eval_every)},
                 {"seed", bind("seed", c.seed)}});
}

void apply(const ConfigFile& file, DecodeConfig& c) {
  apply_section(file, "decode",
                {{"mode", [&c](const std::string& v) { c.mode = parse_decode_mode(v); }},
                 {"beam_width", bind("beam_width", c.beam_width)},
                 {"lm_weight", bind("lm_weight", c.lm_weight)},
                 {"word_bonus", bind("word_bonus", c.word_bonus)},
                 {"lm_unit", [&c](const std::string& v) {
                    if (v == "word") {
                      c.lm_unit = LmUnit::word;
                    } else if (v == "char" || v == "character") {
                      c.lm_unit = LmUnit::character;
                    } else {
                      throw Error("bad value for lm_unit: " + v);
                    }
                  }}});
}

std::string to_config_text(const SyntheticSpec& s) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "[corpus]\n"
      << "l1_symbols = " << s.l1_symbols << '\n'
      << "l2_symbols = " << s.l2_symbols << '\n'
      << "l1_script = " << s.l1_script << '\n'
      << "l2_script = " << s.l2_script << '\n'
      << "l1_lexicon_size = " << s.l1_lexicon_size << '\n'
      << "l2_lexicon_size = " << s.l2_lexicon_size << '\n'
      << "min_word_length = " << s.min_word_length << '\n'
      << "max_word_length = " << s.max_word_length << '\n'
      << "min_words = " << s.min_words << '\n'
      << "max_words = " << s.max_words << '\n'
      << "code_switch_prob = " << s.code_switch_prob << '\n'
      << "min_switched_words = " << s.min_switched_words << '\n'
      << "max_switched_words = " << s.max_switched_words << '\n'
      << "min_frames_per_char = " << s.min_frames_per_char << '\n'
      << "max_frames_per_char = " << s.max_frames_per_char << '\n'
      << "feature_dim = " << s.feature_dim << '\n'
      << "noise = " << s.noise << '\n'
      << "confusability = " << s.confusability << '\n'
      << "train_size = " << s.train_size << '\n'
      << "dev_size = " << s.dev_size << '\n'
      << "test_size = " << s.test_size << '\n'
      << "seed = " << s.seed << '\n';
  return out.str();
}

}  // namespace cctc
