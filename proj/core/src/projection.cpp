#include "dstag/projection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dstag {

namespace {

void validate_vote(const SourceVote& v, std::size_t tag_count) {
  if (v.alignment < 0.0 || v.alignment > 1.0 || !std::isfinite(v.alignment)) {
    throw InputError("alignment probability out of [0,1]");
  }
  double sum = 0.0;
  for (const auto& [tag, conf] : v.confidences) {
    if (tag >= tag_count) throw InputError("vote tag index out of range");
    if (conf < 0.0 || conf > 1.0 || !std::isfinite(conf)) {
      throw InputError("tag confidence out of [0,1]");
    }
    sum += conf;
  }
  // Single (tag, conf) pairs are degenerate one-point distributions and
  // may carry any confidence; real distributions must sum to 1.
  if (v.confidences.size() > 1 && std::fabs(sum - 1.0) > 1e-9) {
    throw InputError("tag confidence distribution does not sum to 1");
  }
}

double parse_prob(const std::string& s, long line_no) {
  double x;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw InputError("bad probability '" + s + "'", line_no);
  }
  return x;
}

}  // namespace

VoteOutcome vote_token(std::span<const SourceVote> votes,
                       std::size_t tag_count) {
  std::vector<double> score(tag_count, 0.0);
  for (const SourceVote& v : votes) {
    validate_vote(v, tag_count);
    for (const auto& [tag, conf] : v.confidences) {
      score[tag] += v.alignment * conf;
    }
  }
  VoteOutcome out;
  for (std::size_t t = 0; t < tag_count; ++t) {
    out.total_mass += score[t];
    if (score[t] > score[out.tag]) out.tag = static_cast<std::uint32_t>(t);
  }
  out.score = score[out.tag];
  out.covered = out.total_mass > 0.0;
  if (!out.covered) out.tag = 0;
  return out;
}

Sentence ProjectedSentence::to_sentence() const {
  Sentence s;
  s.tokens = tokens;
  s.tags = tags;
  s.loss_mask.resize(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    s.loss_mask[i] = tags[i] != kNoTag;
  }
  return s;
}

double mean_coverage(std::span<const double> coverages) {
  if (coverages.empty()) throw ConfigError("mean_coverage: no sources");
  double sum = 0.0;
  for (double c : coverages) sum += c;
  return sum / static_cast<double>(coverages.size());
}

std::vector<ProjectionBlock> parse_projection_file(std::istream& in,
                                                   const TagSet& tags) {
  std::vector<ProjectionBlock> blocks;
  std::string line;
  long line_no = 0;
  std::optional<ProjectionBlock> cur;

  auto flush = [&] {
    if (cur) {
      blocks.push_back(std::move(*cur));
      cur.reset();
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.rfind("#tokens\t", 0) == 0) {
      flush();
      cur.emplace();
      std::istringstream ss(line.substr(8));
      std::string tok;
      while (ss >> tok) cur->tokens.push_back(tok);
      if (cur->tokens.empty()) {
        throw InputError("projection block has no tokens", line_no);
      }
      cur->votes.resize(cur->tokens.size());
      continue;
    }
    if (!cur) {
      throw InputError("vote line before any '#tokens' header", line_no);
    }

    std::vector<std::string> fields;
    {
      std::size_t start = 0;
      while (true) {
        std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(
            start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
    }
    if (fields.size() != 4) {
      throw InputError("expected 's<TAB>j<TAB>a<TAB>votes'", line_no);
    }

    SourceVote vote;
    {
      unsigned long s = 0, j = 0;
      auto rc1 = std::from_chars(fields[0].data(),
                                 fields[0].data() + fields[0].size(), s);
      auto rc2 = std::from_chars(fields[1].data(),
                                 fields[1].data() + fields[1].size(), j);
      if (rc1.ec != std::errc() || rc2.ec != std::errc()) {
        throw InputError("bad source or position index", line_no);
      }
      if (j >= cur->tokens.size()) {
        throw InputError("vote position " + std::to_string(j) +
                             " out of range",
                         line_no);
      }
      vote.source = static_cast<std::uint32_t>(s);
      vote.alignment = parse_prob(fields[2], line_no);

      std::istringstream vs(fields[3]);
      std::string item;
      while (std::getline(vs, item, ',')) {
        std::size_t colon = item.rfind(':');
        if (colon == std::string::npos || colon == 0) {
          throw InputError("expected TAG:conf, got '" + item + "'", line_no);
        }
        auto idx = tags.index(item.substr(0, colon));
        if (!idx) {
          throw InputError("unknown tag '" + item.substr(0, colon) + "'",
                           line_no);
        }
        vote.confidences.emplace_back(*idx,
                                      parse_prob(item.substr(colon + 1),
                                                 line_no));
      }
      if (vote.confidences.empty()) {
        throw InputError("empty vote list", line_no);
      }
      try {
        validate_vote(vote, tags.size());
      } catch (const InputError& e) {
        throw InputError(e.what(), line_no);
      }
      cur->votes[j].push_back(std::move(vote));
    }
  }
  flush();
  return blocks;
}

std::vector<ProjectionBlock> parse_projection_path(const std::string& path,
                                                   const TagSet& tags) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open projection file: " + path);
  return parse_projection_file(in, tags);
}

std::size_t observed_source_count(std::span<const ProjectionBlock> blocks) {
  std::size_t n = 0;
  for (const ProjectionBlock& b : blocks) {
    for (const auto& token_votes : b.votes) {
      for (const SourceVote& v : token_votes) {
        n = std::max(n, static_cast<std::size_t>(v.source) + 1);
      }
    }
  }
  return n;
}

ProjectedSentence project_sentence(const ProjectionBlock& block,
                                   std::size_t source_count,
                                   std::size_t tag_count) {
  const std::size_t n = block.tokens.size();
  ProjectedSentence out;
  out.tokens = block.tokens;
  out.tags.resize(n, kNoTag);
  out.vote_mass.resize(n, 0.0);
  out.source_coverage.assign(std::max<std::size_t>(source_count, 1), 0.0);

  std::vector<std::vector<bool>> aligned(
      out.source_coverage.size(), std::vector<bool>(n, false));
  for (std::size_t j = 0; j < n; ++j) {
    for (const SourceVote& v : block.votes[j]) {
      if (v.source >= out.source_coverage.size()) {
        throw InputError("vote from source " + std::to_string(v.source) +
                         " exceeds declared source count " +
                         std::to_string(source_count));
      }
      if (v.alignment > 0.0) aligned[v.source][j] = true;
    }
    VoteOutcome vo = vote_token(block.votes[j], tag_count);
    out.vote_mass[j] = vo.total_mass;
    if (vo.covered) out.tags[j] = static_cast<std::int32_t>(vo.tag);
  }

  for (std::size_t s = 0; s < out.source_coverage.size(); ++s) {
    std::size_t links = 0;
    for (std::size_t j = 0; j < n; ++j) links += aligned[s][j];
    out.source_coverage[s] =
        static_cast<double>(links) / static_cast<double>(n);
  }
  out.mean_coverage = mean_coverage(out.source_coverage);
  return out;
}

std::vector<std::size_t> select_top_k_indices(std::span<const double> scores,
                                              std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  if (k < idx.size()) idx.resize(k);
  return idx;
}

std::vector<ScoredSentence> select_top_k(std::span<const ScoredSentence> corpus,
                                         std::size_t k) {
  std::vector<double> scores(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    scores[i] = corpus[i].coverage;
  }
  std::vector<ScoredSentence> out;
  for (std::size_t i : select_top_k_indices(scores, k)) {
    out.push_back(corpus[i]);
  }
  return out;
}

std::vector<std::size_t> random_select_indices(std::size_t n, std::size_t k,
                                               std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k >= n) return idx;
  Rng rng(mix64(seed));
  // Partial Fisher-Yates: the first k slots become the sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<ScoredSentence> random_select(std::span<const ScoredSentence> corpus,
                                          std::size_t k, std::uint64_t seed) {
  std::vector<ScoredSentence> out;
  for (std::size_t i : random_select_indices(corpus.size(), k, seed)) {
    out.push_back(corpus[i]);
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

void write_scored_corpus(std::ostream& out,
                         std::span<const ScoredSentence> corpus,
                         const TagSet& tags) {
  for (const ScoredSentence& s : corpus) {
    out << "# coverage=" << format_double(s.coverage) << '\n';
    emit_corpus(out, {&s.sentence, 1}, tags);
  }
}

std::vector<ScoredSentence> read_scored_corpus(std::istream& in,
                                               const TagSet& tags) {
  // Re-parse keeping the coverage comments aligned with the sentences that
  // follow them; a sentence without a preceding comment scores 0.
  std::vector<ScoredSentence> out;
  std::string line;
  long line_no = 0;
  double pending_coverage = 0.0;
  std::stringstream sentence_buf;
  bool any_line = false;

  auto flush = [&] {
    if (!any_line) return;
    std::vector<Sentence> parsed = parse_corpus(sentence_buf, tags);
    if (parsed.size() == 1) {
      out.push_back({std::move(parsed[0]), pending_coverage});
    }
    sentence_buf = std::stringstream();
    pending_coverage = 0.0;
    any_line = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.rfind("# coverage=", 0) == 0) {
      pending_coverage = std::strtod(line.c_str() + 11, nullptr);
      if (pending_coverage < 0.0 || pending_coverage > 1.0) {
        throw InputError("coverage out of [0,1]", line_no);
      }
      continue;
    }
    if (line[0] == '#') continue;
    sentence_buf << line << '\n';
    any_line = true;
  }
  flush();
  return out;
}

std::vector<ScoredSentence> read_scored_corpus_file(const std::string& path,
                                                    const TagSet& tags) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file: " + path);
  return read_scored_corpus(in, tags);
}

}  // namespace dstag
