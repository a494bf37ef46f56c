#include "dstag/eval.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace dstag {

namespace {

void check_aligned(std::span<const Sentence> gold,
                   std::span<const TagSeq> pred) {
  if (gold.size() != pred.size()) {
    throw InputError("gold and prediction corpora differ in sentence count");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw InputError("sentence " + std::to_string(i + 1) +
                       " differs in length between gold and prediction");
    }
  }
}

}  // namespace

double accuracy(std::span<const Sentence> gold, std::span<const TagSeq> pred) {
  check_aligned(gold, pred);
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < gold[i].size(); ++j) {
      if (gold[i].tags[j] == kNoTag) continue;
      ++total;
      correct += pred[i][j] == static_cast<std::uint32_t>(gold[i].tags[j]);
    }
  }
  if (total == 0) throw InputError("no tagged tokens to evaluate");
  return static_cast<double>(correct) / static_cast<double>(total);
}

EvalReport oov_split(std::span<const Sentence> gold,
                     std::span<const TagSeq> pred, const Vocab& train_vocab,
                     std::span<const Lexicon> lexicons,
                     std::size_t tag_count) {
  check_aligned(gold, pred);
  EvalReport r;
  r.per_tag.resize(tag_count);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < gold[i].size(); ++j) {
      if (gold[i].tags[j] == kNoTag) continue;
      const auto g = static_cast<std::uint32_t>(gold[i].tags[j]);
      const bool ok = pred[i][j] == g;

      ++r.all.total;
      r.all.correct += ok;
      ++r.per_tag[g].total;
      r.per_tag[g].correct += ok;

      if (train_vocab.contains(gold[i].tokens[j])) continue;
      ++r.oov.total;
      r.oov.correct += ok;
      bool in_lex = false;
      for (const Lexicon& lex : lexicons) {
        if (lex.lookup(gold[i].tokens[j])) {
          in_lex = true;
          break;
        }
      }
      Bucket& b = in_lex ? r.oov_in_lexicon : r.oov_not_in_lexicon;
      ++b.total;
      b.correct += ok;
    }
  }
  return r;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InputError("pearson: length mismatch");
  if (xs.size() < 2) throw InputError("pearson: need at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw NumericError("pearson: undefined for zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

MeanStd multi_seed(std::span<const double> results) {
  if (results.empty()) throw InputError("multi_seed: no results");
  MeanStd ms;
  for (double r : results) ms.mean += r;
  ms.mean /= static_cast<double>(results.size());
  if (results.size() > 1) {
    double ss = 0.0;
    for (double r : results) ss += (r - ms.mean) * (r - ms.mean);
    ms.stddev = std::sqrt(ss / static_cast<double>(results.size() - 1));
  }
  return ms;
}

std::vector<CurvePoint> learning_curve(std::span<const ScoredSentence> pool,
                                       const CurveSpec& spec,
                                       const CurveRunFn& run) {
  struct Task {
    std::size_t k_idx, sample, seed_idx;
  };
  const std::size_t samples =
      spec.mode == SelectionMode::random ? spec.samples : 1;
  if (samples == 0 || spec.seeds.empty()) {
    throw ConfigError("learning_curve: needs >= 1 sample and >= 1 seed");
  }

  std::vector<CurvePoint> points(spec.sizes.size());
  std::vector<Task> tasks;
  for (std::size_t ki = 0; ki < spec.sizes.size(); ++ki) {
    points[ki].k = spec.sizes[ki];
    points[ki].runs.resize(samples * spec.seeds.size());
    for (std::size_t sa = 0; sa < samples; ++sa) {
      for (std::size_t se = 0; se < spec.seeds.size(); ++se) {
        tasks.push_back({ki, sa, se});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (failure) return;
      }
      const Task& task = tasks[t];
      const std::size_t k = spec.sizes[task.k_idx];
      const std::uint64_t seed = spec.seeds[task.seed_idx];
      try {
        std::vector<ScoredSentence> subset =
            spec.mode == SelectionMode::coverage
                ? select_top_k(pool, k)
                : random_select(pool, k,
                                mix64(spec.subset_seed_base, k, task.sample));
        const double acc = run(k, task.sample, seed, subset);
        points[task.k_idx].runs[task.sample * spec.seeds.size() +
                                task.seed_idx] = {task.sample, seed, acc};
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) {
          failure = std::make_exception_ptr(Error(
              "curve run failed at k=" + std::to_string(k) + " sample=" +
              std::to_string(task.sample) + " seed=" + std::to_string(seed) +
              ": " + e.what()));
        }
      }
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, spec.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < std::min(jobs, tasks.size()); ++i) {
      threads.emplace_back(worker);
    }
    for (std::thread& th : threads) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (CurvePoint& p : points) {
    std::vector<double> accs;
    accs.reserve(p.runs.size());
    for (const RunResult& r : p.runs) accs.push_back(r.accuracy);
    const MeanStd ms = multi_seed(accs);
    p.mean = ms.mean;
    p.stddev = ms.stddev;
  }
  return points;
}

}  // namespace dstag
