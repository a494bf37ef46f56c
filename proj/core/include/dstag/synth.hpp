#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dstag/corpus.hpp"
#include "dstag/lexicon.hpp"
#include "dstag/projection.hpp"
#include "dstag/tagger.hpp"

namespace dstag {

// Desk-scale synthetic benchmark: a hidden-Markov "language" over the 12
// tags with suffix-flavored word forms, a gold corpus, a noisy multi-source
// projection file whose per-token vote correctness rises with sentence
// coverage, a partial lexicon, and a random embedding file. Everything is
// reproducible from the seed.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t pool_sentences = 3000;
  std::size_t dev_sentences = 300;
  std::size_t test_sentences = 1000;
  std::size_t word_types = 2500;
  std::size_t sources = 5;
  std::size_t min_len = 4;
  std::size_t max_len = 18;
  double ambiguous_fraction = 0.25;  // types emitted by two tags
  double suffix_reliability = 0.6;   // chance a form carries its tag's suffix
  double zipf_exponent = 0.6;        // emission weight = 1 / rank^exponent
  double lexicon_fraction = 0.4;     // fraction of types entered in the lexicon
  std::size_t embedding_dim = 16;
  // Vote correctness probability = vote_base + vote_gain * coverage.
  double vote_base = 0.6;
  double vote_gain = 0.35;

  void validate() const;
};

struct SynthBundle {
  TagSet tags = TagSet::universal();
  std::vector<Sentence> pool_gold;
  std::vector<ProjectionBlock> projection;  // parallel to pool_gold
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
  Lexicon lexicon;
  std::vector<std::pair<std::string, std::vector<double>>> embeddings;
};

SynthBundle synth_generate(const SynthConfig& cfg);

// Writes pool.proj.tsv, pool.gold.tsv, dev.tsv, test.tsv, lexicon.tsv and
// embeddings.vec under `dir` (created if missing); byte-stable per seed.
void synth_write(const SynthBundle& bundle, const std::string& dir);

void write_projection_file(std::ostream& out,
                           std::span<const ProjectionBlock> blocks,
                           const TagSet& tags);

// Fixed toy instance for the gradient checker: a 20-word vocabulary,
// word_dim 8, char_dim 4, char_hidden 5, word_hidden 6, and one embedded
// lexicon with 4 properties of length 3, over a 3-sentence corpus.
struct GradCheckFixture {
  Model model;
  std::vector<Sentence> corpus;
};
GradCheckFixture make_grad_check_fixture(std::uint64_t seed = 1);

}  // namespace dstag
