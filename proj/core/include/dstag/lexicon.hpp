#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dstag/corpus.hpp"
#include "dstag/tensor.hpp"

namespace dstag {

// A named source mapping word forms to non-empty subsets of its m
// properties. Wiktionary-style sources use the run's tag set as the
// property list; morphological sources carry their own inventory.
struct Lexicon {
  std::string name;
  std::vector<std::string> properties;  // ordered, stable for a run
  StringMap<std::vector<std::uint32_t>> entries;  // sorted property indices

  std::size_t property_count() const { return properties.size(); }
  std::size_t entry_count() const { return entries.size(); }

  // nullptr when the word is absent.
  const std::vector<std::uint32_t>* lookup(std::string_view word) const;
  const std::vector<std::uint32_t>* lookup(std::string_view word,
                                           bool lowercase_fallback) const;
};

// Lines "word<TAB>prop1;prop2;...". Repeated words union their property
// sets. When `declared_properties` is empty the property list is the
// sorted set of all properties seen in the file.
Lexicon load_lexicon(std::istream& in, const std::string& source_name,
                     std::vector<std::string> declared_properties = {});
Lexicon load_lexicon_file(const std::string& path,
                          const std::string& source_name,
                          std::vector<std::string> declared_properties = {});
void emit_lexicon(std::ostream& out, const Lexicon& lex);

enum class LexMode { none, type_constraints, n_hot, embedded };
enum class LexPooling { concat, mean };

struct LexiconFeatureConfig {
  LexMode mode = LexMode::none;
  std::size_t dim = 40;  // embedding length l per property
  LexPooling pooling = LexPooling::concat;
  bool lowercase_fallback = false;

  void validate() const;
};

// Membership indicator over the source's property inventory: component j
// is 1 iff the word holds property j; the zero vector iff absent.
std::vector<double> n_hot(const Lexicon& lex, std::string_view word,
                          bool lowercase_fallback = false);

// Embedded features for one source. Concat mode lays out m fixed slots of
// length l: slot j is property j's embedding row when held, zero
// otherwise; a word absent from the source yields the m*l zero vector.
// Mean mode averages the held properties' embeddings into l dims.
std::vector<double> embed_lex(const Lexicon& lex, std::string_view word,
                              const Tensor& prop_emb,
                              const LexiconFeatureConfig& cfg);

// Feature width contributed by one source under `cfg`.
std::size_t lexicon_feature_dim(const Lexicon& lex,
                                const LexiconFeatureConfig& cfg);
std::size_t lexicon_feature_dim(std::span<const Lexicon> lexicons,
                                const LexiconFeatureConfig& cfg);

// Concatenation of every source's feature vector in declared order.
// `prop_embs` is parallel to `lexicons` and ignored outside embedded mode.
std::vector<double> merge_sources(std::span<const Lexicon> lexicons,
                                  std::span<const Tensor> prop_embs,
                                  std::string_view word,
                                  const LexiconFeatureConfig& cfg);

}  // namespace dstag
