#pragma once

#include "cctc/common.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cctc {

/// Result of merging adjacent duplicates of a path.
///
/// `h` is the merged sequence (no two adjacent entries equal, so no two
/// adjacent blanks) and `p[t]` is the position in `h` that frame t was merged
/// into. Positions are 0-based: `p[t]` lies in [0, h.size()), is
/// nondecreasing, advances by at most one per frame, and h[p[t]] == path[t].
struct MergedPath {
  std::vector<TokenId> h;
  std::vector<int> p;
};

/// H: merges every run of equal adjacent tokens into one token.
/// Throws Error("empty path") for an empty input.
MergedPath merge_duplicates(std::span<const TokenId> path);

/// G: drops every blank and keeps the order of the remaining tokens.
Transcript remove_blanks(std::span<const TokenId> tokens, TokenId blank);

/// B = G o H, the usual CTC collapse. An empty path collapses to ().
Transcript collapse(std::span<const TokenId> path, TokenId blank);

/// Splits a UTF-8 string into code points, each returned as its own
/// UTF-8 substring. Throws on malformed input.
std::vector<std::string> utf8_split(std::string_view text);

/// Ordered character set A plus the blank, with a script tag per character.
///
/// Token ids index A' = {blank} + A with the blank fixed at id 0, so
/// character i of A has token id i + 1. The order is fixed at construction
/// and is what checkpoints persist.
class Alphabet {
 public:
  struct Entry {
    std::string symbol;
    std::string script;
  };

  Alphabet() = default;
  explicit Alphabet(std::vector<Entry> entries);

  /// |A|, the number of non-blank characters.
  int size() const { return static_cast<int>(entries_.size()); }
  /// |A'| = |A| + 1.
  int augmented_size() const { return size() + 1; }
  TokenId blank() const { return 0; }

  const std::string& symbol(TokenId id) const;
  const std::string& script(TokenId id) const;
  std::optional<TokenId> find(std::string_view symbol) const;
  const std::vector<Entry>& entries() const { return entries_; }

  /// Column of a non-blank token in a context head (heads predict over A).
  int char_index(TokenId id) const { return id - 1; }
  TokenId token_of_char_index(int index) const { return index + 1; }

  /// Token id of the space character if the alphabet has one.
  std::optional<TokenId> word_delimiter() const { return find(" "); }

  Transcript encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> tokens) const;

  /// Alphabet file: `#blank` header, then one `char<TAB>script` per line.
  void write(std::ostream& out) const;
  static Alphabet read(std::istream& in);
  void save(const std::string& path) const;
  static Alphabet load(const std::string& path);

  bool operator==(const Alphabet& other) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace cctc
