#include "dstag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "dstag/rng.hpp"

namespace dstag {

void SynthConfig::validate() const {
  if (word_types < 2 * kTagCount) {
    throw ConfigError("synth: need at least 24 word types");
  }
  if (min_len == 0 || max_len < min_len) {
    throw ConfigError("synth: bad sentence length range");
  }
  if (sources == 0) throw ConfigError("synth: need at least one source");
  if (lexicon_fraction < 0.0 || lexicon_fraction > 1.0) {
    throw ConfigError("synth: lexicon fraction out of [0,1]");
  }
  if (ambiguous_fraction < 0.0 || ambiguous_fraction > 1.0) {
    throw ConfigError("synth: ambiguous fraction out of [0,1]");
  }
}

namespace {

struct WordType {
  std::string form;
  std::vector<std::uint32_t> tags;  // 1 or 2 tags, sorted
};

struct Language {
  std::vector<double> initial;                  // over tags
  std::vector<std::vector<double>> transition;  // [from][to]
  std::vector<WordType> types;
  // Per tag: indices into `types` and cumulative emission weights.
  std::vector<std::vector<std::size_t>> tag_types;
  std::vector<std::vector<double>> tag_cumulative;
};

std::vector<double> random_distribution(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (double& x : w) {
    x = std::exp(rng.uniform(-1.5, 1.5));
    sum += x;
  }
  for (double& x : w) x /= sum;
  return w;
}

std::size_t sample_cumulative(Rng& rng, std::span<const double> cumulative) {
  const double r = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
  return std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
}

std::size_t sample_distribution(Rng& rng, std::span<const double> dist) {
  double r = rng.uniform();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    r -= dist[i];
    if (r < 0.0) return i;
  }
  return dist.size() - 1;
}

Language build_language(const SynthConfig& cfg) {
  Language lang;
  Rng rng(mix64(cfg.seed, 0x1a26));

  lang.initial = random_distribution(rng, kTagCount);
  lang.transition.resize(kTagCount);
  for (auto& row : lang.transition) row = random_distribution(rng, kTagCount);

  // One distinct two-letter suffix per tag; a form's suffix hints at its
  // tag with probability suffix_reliability.
  std::vector<std::string> suffixes;
  std::set<std::string> used;
  while (suffixes.size() < kTagCount) {
    std::string sfx{static_cast<char>('a' + rng.below(26)),
                    static_cast<char>('a' + rng.below(26))};
    if (used.insert(sfx).second) suffixes.push_back(sfx);
  }

  std::set<std::string> forms;
  lang.tag_types.resize(kTagCount);
  lang.tag_cumulative.resize(kTagCount);
  for (std::size_t t = 0; t < cfg.word_types; ++t) {
    WordType wt;
    const auto primary = static_cast<std::uint32_t>(rng.below(kTagCount));
    wt.tags.push_back(primary);
    if (rng.bernoulli(cfg.ambiguous_fraction)) {
      auto secondary = static_cast<std::uint32_t>(rng.below(kTagCount - 1));
      if (secondary >= primary) ++secondary;
      wt.tags.push_back(secondary);
      std::sort(wt.tags.begin(), wt.tags.end());
    }
    do {
      std::string stem;
      const std::size_t stem_len = 2 + rng.below(4);
      for (std::size_t i = 0; i < stem_len; ++i) {
        stem.push_back(static_cast<char>('a' + rng.below(26)));
      }
      const std::size_t suffix_tag = rng.bernoulli(cfg.suffix_reliability)
                                         ? primary
                                         : rng.below(kTagCount);
      wt.form = stem + suffixes[suffix_tag];
    } while (!forms.insert(wt.form).second);

    for (std::uint32_t tag : wt.tags) {
      // Zipf-flavored weights: early types per tag are frequent, the tail
      // is rare, which yields natural OOV at evaluation time.
      const double rank =
          static_cast<double>(lang.tag_types[tag].size()) + 1.0;
      const double weight = 1.0 / std::pow(rank, cfg.zipf_exponent);
      lang.tag_types[tag].push_back(t);
      const double prev = lang.tag_cumulative[tag].empty()
                              ? 0.0
                              : lang.tag_cumulative[tag].back();
      lang.tag_cumulative[tag].push_back(prev + weight);
    }
    lang.types.push_back(std::move(wt));
  }

  // Every tag needs at least one type to emit.
  for (std::size_t tag = 0; tag < kTagCount; ++tag) {
    if (lang.tag_types[tag].empty()) {
      throw ConfigError("synth: tag without word types; raise word_types");
    }
  }
  return lang;
}

Sentence sample_sentence(const Language& lang, const SynthConfig& cfg,
                         Rng& rng) {
  Sentence s;
  const std::size_t len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
  std::size_t tag = sample_distribution(rng, lang.initial);
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0) tag = sample_distribution(rng, lang.transition[tag]);
    const std::size_t which = sample_cumulative(rng, lang.tag_cumulative[tag]);
    const std::size_t type_idx = lang.tag_types[tag][which];
    s.tokens.push_back(lang.types[type_idx].form);
    s.tags.push_back(static_cast<std::int32_t>(tag));
    s.loss_mask.push_back(true);
  }
  return s;
}

std::vector<Sentence> sample_corpus(const Language& lang,
                                    const SynthConfig& cfg, std::size_t n,
                                    std::uint64_t stream) {
  Rng rng(mix64(cfg.seed, stream));
  std::vector<Sentence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_sentence(lang, cfg, rng));
  return out;
}

ProjectionBlock make_projection(const Sentence& gold, const SynthConfig& cfg,
                                Rng& rng) {
  ProjectionBlock block;
  block.tokens = gold.tokens;
  block.votes.resize(gold.size());

  const double coverage = rng.uniform(0.05, 1.0);
  const double p_correct =
      std::min(0.98, cfg.vote_base + cfg.vote_gain * coverage);

  for (std::size_t s = 0; s < cfg.sources; ++s) {
    for (std::size_t j = 0; j < gold.size(); ++j) {
      if (!rng.bernoulli(coverage)) continue;
      SourceVote v;
      v.source = static_cast<std::uint32_t>(s);
      v.alignment = rng.uniform(0.5, 1.0);

      const auto gold_tag = static_cast<std::uint32_t>(gold.tags[j]);
      std::uint32_t voted = gold_tag;
      if (!rng.bernoulli(p_correct)) {
        voted = static_cast<std::uint32_t>(rng.below(kTagCount - 1));
        if (voted >= gold_tag) ++voted;
      }
      // Two-point distribution: most mass on the voted tag, the remainder
      // on one competitor.
      const double q = rng.uniform(0.7, 0.95);
      auto other = static_cast<std::uint32_t>(rng.below(kTagCount - 1));
      if (other >= voted) ++other;
      v.confidences = {{voted, q}, {other, 1.0 - q}};
      block.votes[j].push_back(std::move(v));
    }
  }
  return block;
}

}  // namespace

SynthBundle synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const Language lang = build_language(cfg);

  SynthBundle bundle;
  bundle.pool_gold = sample_corpus(lang, cfg, cfg.pool_sentences, 0xb001);
  bundle.dev = sample_corpus(lang, cfg, cfg.dev_sentences, 0xdead);
  bundle.test = sample_corpus(lang, cfg, cfg.test_sentences, 0x7e57);

  Rng proj_rng(mix64(cfg.seed, 0x9403));
  bundle.projection.reserve(bundle.pool_gold.size());
  for (const Sentence& s : bundle.pool_gold) {
    bundle.projection.push_back(make_projection(s, cfg, proj_rng));
  }

  // Partial lexicon over round(fraction * types) types, sampled uniformly.
  bundle.lexicon.name = "synth";
  bundle.lexicon.properties.assign(bundle.tags.names().begin(),
                                   bundle.tags.names().end());
  const auto n_lex = static_cast<std::size_t>(
      std::llround(cfg.lexicon_fraction * static_cast<double>(cfg.word_types)));
  {
    Rng lex_rng(mix64(cfg.seed, 0x1e81));
    std::vector<std::size_t> idx(cfg.word_types);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n_lex && i < idx.size(); ++i) {
      std::swap(idx[i], idx[i + lex_rng.below(idx.size() - i)]);
    }
    for (std::size_t i = 0; i < n_lex; ++i) {
      const WordType& wt = lang.types[idx[i]];
      bundle.lexicon.entries.emplace(wt.form, wt.tags);
    }
  }

  Rng emb_rng(mix64(cfg.seed, 0xe3b));
  for (const WordType& wt : lang.types) {
    std::vector<double> vec(cfg.embedding_dim);
    for (double& x : vec) x = emb_rng.uniform(-0.5, 0.5);
    bundle.embeddings.emplace_back(wt.form, std::move(vec));
  }
  return bundle;
}

void write_projection_file(std::ostream& out,
                           std::span<const ProjectionBlock> blocks,
                           const TagSet& tags) {
  for (const ProjectionBlock& b : blocks) {
    out << "#tokens\t";
    for (std::size_t i = 0; i < b.tokens.size(); ++i) {
      if (i) out << ' ';
      out << b.tokens[i];
    }
    out << '\n';
    for (std::size_t j = 0; j < b.votes.size(); ++j) {
      for (const SourceVote& v : b.votes[j]) {
        out << v.source << '\t' << j << '\t' << format_double(v.alignment)
            << '\t';
        for (std::size_t c = 0; c < v.confidences.size(); ++c) {
          if (c) out << ',';
          out << tags.name(v.confidences[c].first) << ':'
              << format_double(v.confidences[c].second);
        }
        out << '\n';
      }
    }
    out << '\n';
  }
}

GradCheckFixture make_grad_check_fixture(std::uint64_t seed) {
  Rng rng(mix64(seed, 0x6f1d));

  // 20 distinct short word forms.
  std::vector<std::string> words;
  std::set<std::string> seen;
  while (words.size() < 20) {
    std::string w;
    for (std::size_t c = 0; c < 2 + rng.below(3); ++c) {
      w.push_back(static_cast<char>('a' + rng.below(26)));
    }
    if (seen.insert(w).second) words.push_back(w);
  }

  GradCheckFixture fx;
  for (std::size_t lens : {7u, 5u, 8u}) {
    Sentence s;
    for (std::size_t i = 0; i < lens; ++i) {
      s.tokens.push_back(words[rng.below(words.size())]);
      s.tags.push_back(static_cast<std::int32_t>(rng.below(kTagCount)));
      s.loss_mask.push_back(true);
    }
    // One masked position per sentence so that path is exercised too.
    s.loss_mask[rng.below(lens)] = false;
    fx.corpus.push_back(std::move(s));
  }

  Lexicon lex;
  lex.name = "morph";
  lex.properties = {"f0", "f1", "f2", "f3"};
  for (std::size_t i = 0; i < words.size(); i += 2) {
    std::vector<std::uint32_t> props{static_cast<std::uint32_t>(i % 4)};
    if (rng.bernoulli(0.5)) props.push_back((props[0] + 1) % 4);
    std::sort(props.begin(), props.end());
    lex.entries.emplace(words[i], std::move(props));
  }

  fx.model.cfg.word_dim = 8;
  fx.model.cfg.char_dim = 4;
  fx.model.cfg.char_hidden = 5;
  fx.model.cfg.word_hidden = 6;
  fx.model.cfg.lex.mode = LexMode::embedded;
  fx.model.cfg.lex.dim = 3;
  fx.model.vocab = build_vocab(fx.corpus);
  fx.model.chars = CharVocab::build(fx.corpus);
  fx.model.lexicons = {std::move(lex)};
  Rng init(mix64(seed, 0x40c4));
  fx.model.init_params(init);
  return fx;
}

void synth_write(const SynthBundle& bundle, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) throw InputError("cannot write " + dir + "/" + name);
    return out;
  };

  {
    auto out = open("pool.gold.tsv");
    emit_corpus(out, bundle.pool_gold, bundle.tags);
  }
  {
    auto out = open("pool.proj.tsv");
    write_projection_file(out, bundle.projection, bundle.tags);
  }
  {
    auto out = open("dev.tsv");
    emit_corpus(out, bundle.dev, bundle.tags);
  }
  {
    auto out = open("test.tsv");
    emit_corpus(out, bundle.test, bundle.tags);
  }
  {
    auto out = open("lexicon.tsv");
    emit_lexicon(out, bundle.lexicon);
  }
  {
    auto out = open("embeddings.vec");
    for (const auto& [form, vec] : bundle.embeddings) {
      out << form;
      for (double x : vec) out << ' ' << format_double(x);
      out << '\n';
    }
  }
}

}  // namespace dstag
