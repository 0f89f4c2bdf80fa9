#include "cctc/path_algebra.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cctc {

MergedPath merge_duplicates(std::span<const TokenId> path) {
  if (path.empty()) throw Error("empty path");
  MergedPath merged;
  merged.h.reserve(path.size());
  merged.p.reserve(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t == 0 || path[t] != path[t - 1]) merged.h.push_back(path[t]);
    merged.p.push_back(static_cast<int>(merged.h.size()) - 1);
  }
  return merged;
}

Transcript remove_blanks(std::span<const TokenId> tokens, TokenId blank) {
  Transcript out;
  out.reserve(tokens.size());
  for (TokenId tok : tokens) {
    if (tok != blank) out.push_back(tok);
  }
  return out;
}

Transcript collapse(std::span<const TokenId> path, TokenId blank) {
  Transcript out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == blank) continue;
    if (t > 0 && path[t] == path[t - 1]) continue;
    out.push_back(path[t]);
  }
  return out;
}

std::vector<std::string> utf8_split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    if (lead < 0x80) {
      len = 1;
    } else if ((lead >> 5) == 0x6) {
      len = 2;
    } else if ((lead >> 4) == 0xE) {
      len = 3;
    } else if ((lead >> 3) == 0x1E) {
      len = 4;
    } else {
      throw Error("malformed utf-8");
    }
    if (i + len > text.size()) throw Error("malformed utf-8");
    for (std::size_t j = 1; j < len; ++j) {
      if ((static_cast<unsigned char>(text[i + j]) >> 6) != 0x2) throw Error("malformed utf-8");
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Alphabet::Alphabet(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.symbol.empty() || e.symbol == "#blank") throw Error("invalid alphabet symbol");
    if (utf8_split(e.symbol).size() != 1) throw Error("alphabet symbol is not one character: " + e.symbol);
    if (e.script.empty()) throw Error("missing script tag for " + e.symbol);
    if (!index_.emplace(e.symbol, static_cast<TokenId>(i) + 1).second) {
      throw Error("duplicate alphabet symbol: " + e.symbol);
    }
  }
}

const std::string& Alphabet::symbol(TokenId id) const {
  if (id < 1 || id > size()) throw Error("token id out of range");
  return entries_[id - 1].symbol;
}

const std::string& Alphabet::script(TokenId id) const {
  if (id < 1 || id > size()) throw Error("token id out of range");
  return entries_[id - 1].script;
}

std::optional<TokenId> Alphabet::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Transcript Alphabet::encode(std::string_view text) const {
  Transcript out;
  for (const auto& ch : utf8_split(text)) {
    auto id = find(ch);
    if (!id) throw Error("character not in alphabet: '" + ch + "'");
    out.push_back(*id);
  }
  return out;
}

std::string Alphabet::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId tok : tokens) {
    if (tok == blank()) continue;
    out += symbol(tok);
  }
  return out;
}

void Alphabet::write(std::ostream& out) const {
  out << "#blank\n";
  for (const auto& e : entries_) out << e.symbol << '\t' << e.script << '\n';
}

Alphabet Alphabet::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "#blank") throw Error("alphabet file must start with #blank");
  std::vector<Entry> entries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error("malformed alphabet line " + std::to_string(line_no));
    }
    entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return Alphabet(std::move(entries));
}

void Alphabet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write(out);
}

Alphabet Alphabet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return read(in);
}

bool Alphabet::operator==(const Alphabet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].symbol != other.entries_[i].symbol || entries_[i].script != other.entries_[i].script) {
      return false;
    }
  }
  return true;
}

}  // namespace cctc
