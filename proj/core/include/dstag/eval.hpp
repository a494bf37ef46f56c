#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dstag/corpus.hpp"
#include "dstag/lexicon.hpp"
#include "dstag/projection.hpp"

namespace dstag {

using TagSeq = std::vector<std::uint32_t>;

// Token accuracy over aligned gold/prediction sequences. Gold positions
// without a tag are skipped.
double accuracy(std::span<const Sentence> gold,
                std::span<const TagSeq> pred);

struct Bucket {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::optional<double> acc() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(total);
  }
};

// Evaluation quantities; undefined metrics (empty buckets) are reported as
// absent, never as 0.
struct EvalReport {
  Bucket all;
  std::vector<Bucket> per_tag;  // indexed by tag
  Bucket oov;                   // tokens absent from the training vocab
  Bucket oov_in_lexicon;        // OOV and present in >= 1 lexicon
  Bucket oov_not_in_lexicon;    // OOV and absent from all lexicons
};

// OOV = token absent from `train_vocab`; covered = present in at least one
// of `lexicons`. The two OOV buckets partition the OOV tokens.
EvalReport oov_split(std::span<const Sentence> gold,
                     std::span<const TagSeq> pred, const Vocab& train_vocab,
                     std::span<const Lexicon> lexicons,
                     std::size_t tag_count);

// Pearson correlation; throws on zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) standard deviation; 0 for n == 1
};
MeanStd multi_seed(std::span<const double> results);

struct RunResult {
  std::size_t sample = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

struct CurvePoint {
  std::size_t k = 0;
  std::vector<RunResult> runs;
  double mean = 0.0;
  double stddev = 0.0;
};

enum class SelectionMode { coverage, random };

struct CurveSpec {
  std::vector<std::size_t> sizes;
  std::size_t samples = 5;                // random mode; coverage collapses to 1
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  SelectionMode mode = SelectionMode::coverage;
  std::uint64_t subset_seed_base = 1;     // stream for the random subset draws
  std::size_t jobs = 1;
};

// Called once per (k, sample, seed) with the selected training subset;
// returns the run's accuracy. Must be thread-safe when jobs > 1.
using CurveRunFn = std::function<double(
    std::size_t k, std::size_t sample, std::uint64_t seed,
    const std::vector<ScoredSentence>& subset)>;

// Runs the full sweep: for every k, `samples` seeded uniform draws in
// random mode (a single deterministic top-k in coverage mode) times one
// training run per seed, aggregated with multi_seed. Failures propagate
// with (k, sample, seed) context.
std::vector<CurvePoint> learning_curve(std::span<const ScoredSentence> pool,
                                       const CurveSpec& spec,
                                       const CurveRunFn& run);

}  // namespace dstag
