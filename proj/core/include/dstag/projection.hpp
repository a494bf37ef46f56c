#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dstag/corpus.hpp"
#include "dstag/rng.hpp"

namespace dstag {

// One source's vote on one target token: an alignment probability and a
// tag confidence distribution. A single-best tag arrives as a one-point
// distribution.
struct SourceVote {
  std::uint32_t source = 0;
  double alignment = 0.0;  // in [0, 1]
  std::vector<std::pair<std::uint32_t, double>> confidences;  // tag -> conf
};

struct VoteOutcome {
  bool covered = false;
  std::uint32_t tag = 0;
  double score = 0.0;       // winning tag's accumulated mass
  double total_mass = 0.0;  // sum over all tags
};

// Weighted majority voting: score(t) = sum over votes of alignment *
// conf(t); the winner is the argmax, ties broken toward the lower tag
// index. Uncovered iff the total mass is zero.
VoteOutcome vote_token(std::span<const SourceVote> votes,
                       std::size_t tag_count);

// Decoded projection for one target sentence.
struct ProjectedSentence {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> tags;        // kNoTag where uncovered
  std::vector<double> vote_mass;         // per token
  std::vector<double> source_coverage;   // per source, fraction of tokens
  double mean_coverage = 0.0;

  Sentence to_sentence() const;  // uncovered tokens untagged and masked
};

// Arithmetic mean over the configured source count; absent sources count
// as zero coverage rather than shrinking the denominator.
double mean_coverage(std::span<const double> coverages);

// Raw per-sentence projection input prior to decoding.
struct ProjectionBlock {
  std::vector<std::string> tokens;
  std::vector<std::vector<SourceVote>> votes;  // per token position
};

// Block format: line "#tokens<TAB>t1 t2 ...", then vote lines
// "s<TAB>j<TAB>a<TAB>TAG:conf[,TAG:conf...]", blank line terminates.
std::vector<ProjectionBlock> parse_projection_file(std::istream& in,
                                                   const TagSet& tags);
std::vector<ProjectionBlock> parse_projection_path(const std::string& path,
                                                   const TagSet& tags);

// Highest source id + 1 across all blocks; 0 for an empty file.
std::size_t observed_source_count(std::span<const ProjectionBlock> blocks);

// A source is considered to align token j iff it cast a vote with
// alignment probability > 0 there.
ProjectedSentence project_sentence(const ProjectionBlock& block,
                                   std::size_t source_count,
                                   std::size_t tag_count);

// A sentence paired with its mean coverage score, the unit the selection
// and curve machinery operates on.
struct ScoredSentence {
  Sentence sentence;
  double coverage = 0.0;
};

// Indices of the k highest scores; stable (ties keep input order), result
// in descending score order; k >= n returns everything.
std::vector<std::size_t> select_top_k_indices(std::span<const double> scores,
                                              std::size_t k);
std::vector<ScoredSentence> select_top_k(std::span<const ScoredSentence> corpus,
                                         std::size_t k);

// Uniform sample of k indices without replacement, deterministic per seed;
// result keeps input order.
std::vector<std::size_t> random_select_indices(std::size_t n, std::size_t k,
                                               std::uint64_t seed);
std::vector<ScoredSentence> random_select(std::span<const ScoredSentence> corpus,
                                          std::size_t k, std::uint64_t seed);

// Corpus TSV with one "# coverage=<float>" comment line preceding each
// sentence. parse_corpus skips the comments; this reader keeps them.
void write_scored_corpus(std::ostream& out,
                         std::span<const ScoredSentence> corpus,
                         const TagSet& tags);
std::vector<ScoredSentence> read_scored_corpus(std::istream& in,
                                               const TagSet& tags);
std::vector<ScoredSentence> read_scored_corpus_file(const std::string& path,
                                                    const TagSet& tags);

// Shortest float formatting that round-trips exactly ("%.17g" trimmed).
std::string format_double(double x);

constexpr std::size_t kDefaultSelectionSize = 5000;

}  // namespace dstag
