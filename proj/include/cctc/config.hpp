#pragma once

#include "cctc/acoustic_model.hpp"
#include "cctc/corpus.hpp"
#include "cctc/decoder.hpp"
#include "cctc/trainer.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace cctc {

/// Experiment configuration: `[section]` headers followed by `key = value`
/// lines; `#` starts a comment. Keys are addressed as "section.key".
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in);
  static ConfigFile load(const std::string& path);

  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Each `apply` reads the keys of its section and rejects unknown ones.
void apply(const ConfigFile& file, SyntheticSpec& spec);
void apply(const ConfigFile& file, ModelConfig& config);
void apply(const ConfigFile& file, TrainConfig& config);
void apply(const ConfigFile& file, DecodeConfig& config);

/// `[corpus]` section text for a spec, accepted back by apply().
std::string to_config_text(const SyntheticSpec& spec);

}  // namespace cctc
