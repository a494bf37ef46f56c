#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dstag/errors.hpp"

namespace dstag {

// Transparent string hashing so lookups take string_view without a copy.
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const {
    return std::hash<std::string_view>{}(s);
  }
};
template <class V>
using StringMap =
    std::unordered_map<std::string, V, StringHash, std::equal_to<>>;

constexpr std::size_t kTagCount = 12;

// The coarse 12-tag inventory. Names are configurable but there are always
// exactly 12 distinct tags; "." is accepted on input as an alias for PUNCT.
class TagSet {
 public:
  static TagSet universal();
  explicit TagSet(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::span<const std::string> names() const { return names_; }
  std::optional<std::uint32_t> index(std::string_view name) const;

  bool operator==(const TagSet& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  StringMap<std::uint32_t> index_;
};

constexpr std::int32_t kNoTag = -1;

// A token sequence with per-token optional tags and loss masks. A position
// participates in the training loss iff loss_mask is true; untagged
// positions are always masked.
struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> tags;  // kNoTag when untagged
  std::vector<bool> loss_mask;

  std::size_t size() const { return tokens.size(); }
  bool has_tags() const;
  std::size_t unmasked_count() const;
};

// Two-column TSV: "token<TAB>tag" or bare "token"; sentences separated by
// blank lines; lines starting with '#' are ignored.
std::vector<Sentence> parse_corpus(std::istream& in, const TagSet& tags);
std::vector<Sentence> parse_corpus_file(const std::string& path,
                                        const TagSet& tags);
void emit_corpus(std::ostream& out, std::span<const Sentence> corpus,
                 const TagSet& tags);

// Word-form vocabulary with reserved UNK at index 0; indices are dense and
// assigned in order of first occurrence.
struct Vocab {
  static constexpr std::uint32_t kUnk = 0;

  std::vector<std::string> words;       // words[0] is the UNK placeholder
  std::vector<std::uint64_t> freqs;     // parallel; freqs[0] == 0
  StringMap<std::uint32_t> index;

  std::size_t size() const { return words.size(); }
  std::uint32_t lookup(std::string_view w) const;
  std::uint64_t freq_of(std::string_view w) const;
  bool contains(std::string_view w) const {
    return index.find(w) != index.end();
  }
};

Vocab build_vocab(std::span<const Sentence> train, std::uint64_t min_freq = 1);

}  // namespace dstag
