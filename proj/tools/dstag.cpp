// dstag: distant-supervision POS tagging toolkit.
//
// Subcommands cover the full pipeline: decode multi-source projections
// (project), pick training instances (select), train and apply the tagger
// (train, tag), score predictions (eval), sweep learning curves (curve),
// generate a synthetic benchmark (synth) and verify gradients (check-grad).

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include "dstag/eval.hpp"
#include "dstag/serialize.hpp"
#include "dstag/synth.hpp"
#include "dstag/tagger.hpp"

namespace fs = std::filesystem;
using namespace dstag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;    // validation / configuration errors
constexpr int kExitNumeric = 2;  // runtime numerical errors

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

TagSet make_tagset(const std::string& csv) {
  if (csv.empty()) return TagSet::universal();
  return TagSet(split(csv, ','));
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : split(csv, ',')) {
    seeds.push_back(std::stoull(s));
  }
  if (seeds.empty()) throw ConfigError("--seeds must list at least one seed");
  return seeds;
}

std::string hex64(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// name=path pairs from repeated --lexicon flags, order-preserving.
std::vector<std::pair<std::string, std::string>> parse_lexicon_flags(
    const std::vector<std::string>& flags) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& f : flags) {
    const std::size_t eq = f.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == f.size()) {
      throw ConfigError("--lexicon expects name=path, got '" + f + "'");
    }
    out.emplace_back(f.substr(0, eq), f.substr(eq + 1));
  }
  return out;
}

// A lexicon whose properties are all tag names is a tag dictionary and is
// re-indexed onto the full tag set, so type constraints and lexicon
// features share indices.
Lexicon load_cli_lexicon(const std::string& path, const std::string& name,
                         const TagSet& tags) {
  Lexicon derived = load_lexicon_file(path, name);
  bool tag_dictionary = true;
  for (const std::string& p : derived.properties) {
    if (!tags.index(p)) {
      tag_dictionary = false;
      break;
    }
  }
  if (!tag_dictionary) return derived;
  std::vector<std::string> names(tags.names().begin(), tags.names().end());
  return load_lexicon_file(path, name, std::move(names));
}

LexMode parse_lex_mode(const std::string& s) {
  if (s == "none") return LexMode::none;
  if (s == "tc") return LexMode::type_constraints;
  if (s == "nhot") return LexMode::n_hot;
  if (s == "embed") return LexMode::embedded;
  throw ConfigError("--lex-mode must be one of none, tc, nhot, embed");
}

SelectionMode parse_selection_mode(const std::string& s) {
  if (s == "coverage") return SelectionMode::coverage;
  if (s == "random") return SelectionMode::random;
  throw ConfigError("--mode must be 'coverage' or 'random'");
}

// ---------------------------------------------------------------------------
// Run ledger: append-only TSV of (config, k, sample, seed, metric, value).

struct LedgerRow {
  std::string config;
  std::size_t k = 0;
  std::size_t sample = 0;
  std::uint64_t seed = 0;
  std::string metric;
  std::string value;
};

class Ledger {
 public:
  explicit Ledger(std::string path) : path_(std::move(path)) {}

  void append(const LedgerRow& r) {
    std::lock_guard<std::mutex> lock(mu_);
    const bool fresh = !fs::exists(path_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw InputError("cannot append to ledger: " + path_);
    if (fresh) out << "# config\tk\tsample\tseed\tmetric\tvalue\n";
    out << r.config << '\t' << r.k << '\t' << r.sample << '\t' << r.seed
        << '\t' << r.metric << '\t' << r.value << '\n';
  }

  static std::vector<LedgerRow> load(const std::string& path) {
    std::vector<LedgerRow> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto fields = split(line, '\t');
      if (fields.size() != 6) continue;
      rows.push_back({fields[0], std::stoull(fields[1]),
                      std::stoull(fields[2]), std::stoull(fields[3]),
                      fields[4], fields[5]});
    }
    return rows;
  }

 private:
  std::string path_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Shared training options (train and curve).

struct TrainOptions {
  std::string train_path, dev_path, out_dir = ".";
  std::string embeddings_path;
  std::vector<std::string> lexicon_flags;
  std::string lex_mode = "none";
  std::size_t lex_dim = 40;
  std::string lex_pooling = "concat";
  bool lex_lowercase = false;
  std::size_t dim_word = 64, dim_char = 32, hidden_char = 50, hidden_word = 100;
  std::size_t epochs = 10;
  double word_dropout = 0.25;
  std::string dropout_scheme = "freq";
  double learning_rate = 0.1;
  std::uint64_t min_freq = 1;
  std::string seeds = "1";
  std::string tags_csv;
  bool dim_word_given = false;
};

void add_train_options(CLI::App* cmd, TrainOptions* o) {
  cmd->add_option("--dev", o->dev_path, "Gold dev corpus (reporting only)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--embeddings", o->embeddings_path,
                  "Pre-trained word embedding text file");
  cmd->add_option("--lexicon", o->lexicon_flags,
                  "Lexicon source as name=path (repeatable, order matters)");
  cmd->add_option("--lex-mode", o->lex_mode,
                  "Lexicon feature mode: none, tc, nhot, embed");
  cmd->add_option("--lex-dim", o->lex_dim,
                  "Embedding length l per lexicon property");
  cmd->add_option("--lex-pooling", o->lex_pooling,
                  "Embedded-mode pooling: concat or mean");
  cmd->add_flag("--lex-lowercase", o->lex_lowercase,
                "Fall back to lowercased lexicon lookups");
  cmd->add_option("--dim-word", o->dim_word, "Word embedding dimension")
      ->each([o](const std::string&) { o->dim_word_given = true; });
  cmd->add_option("--dim-char", o->dim_char, "Character embedding dimension");
  cmd->add_option("--hidden-char", o->hidden_char,
                  "Character bi-LSTM hidden size");
  cmd->add_option("--hidden-word", o->hidden_word,
                  "Word bi-LSTM hidden size");
  cmd->add_option("--epochs", o->epochs, "Training epochs");
  cmd->add_option("--word-dropout", o->word_dropout, "Word dropout rate p");
  cmd->add_option("--dropout-scheme", o->dropout_scheme,
                  "Word dropout scheme: freq (p/(p+f)) or fixed");
  cmd->add_option("--lr", o->learning_rate, "SGD learning rate");
  cmd->add_option("--min-freq", o->min_freq, "Vocabulary frequency cutoff");
  cmd->add_option("--seeds", o->seeds, "Comma-separated training seeds");
  cmd->add_option("--tags", o->tags_csv,
                  "Comma-separated 12-tag inventory (default: universal)");
  cmd->add_option("--out", o->out_dir, "Output directory");
}

struct ResolvedTrain {
  TagSet tags = TagSet::universal();
  ModelConfig mcfg;
  TrainConfig tcfg;  // seed filled per run
  std::vector<std::uint64_t> seeds;
  std::vector<Lexicon> lexicons;
  std::optional<EmbeddingTable> embeddings;
};

ResolvedTrain resolve_train(const TrainOptions& o) {
  ResolvedTrain r;
  r.tags = make_tagset(o.tags_csv);

  if (!o.embeddings_path.empty()) {
    r.embeddings = load_embeddings_file(o.embeddings_path, &std::cerr);
  }

  r.mcfg.word_dim = o.dim_word;
  if (r.embeddings && !o.dim_word_given) {
    r.mcfg.word_dim = r.embeddings->dim;
  }
  r.mcfg.char_dim = o.dim_char;
  r.mcfg.char_hidden = o.hidden_char;
  r.mcfg.word_hidden = o.hidden_word;
  r.mcfg.lex.mode = parse_lex_mode(o.lex_mode);
  r.mcfg.lex.dim = o.lex_dim;
  r.mcfg.lex.pooling =
      o.lex_pooling == "mean" ? LexPooling::mean : LexPooling::concat;
  r.mcfg.lex.lowercase_fallback = o.lex_lowercase;

  r.tcfg.epochs = o.epochs;
  r.tcfg.word_dropout = o.word_dropout;
  if (o.dropout_scheme == "freq") {
    r.tcfg.dropout_scheme = DropoutScheme::frequency;
  } else if (o.dropout_scheme == "fixed") {
    r.tcfg.dropout_scheme = DropoutScheme::fixed;
  } else {
    throw ConfigError("--dropout-scheme must be 'freq' or 'fixed'");
  }
  r.tcfg.learning_rate = o.learning_rate;
  r.tcfg.min_freq = o.min_freq;
  r.seeds = parse_seeds(o.seeds);

  // Lexicon features require sources; type constraints are decode-time and
  // need none here.
  for (const auto& [name, path] : parse_lexicon_flags(o.lexicon_flags)) {
    r.lexicons.push_back(load_cli_lexicon(path, name, r.tags));
  }
  if ((r.mcfg.lex.mode == LexMode::n_hot ||
       r.mcfg.lex.mode == LexMode::embedded) &&
      r.lexicons.empty()) {
    throw ConfigError("lexicon mode '" + o.lex_mode +
                      "' needs at least one --lexicon source");
  }
  return r;
}

// Fingerprint of everything that influences a training run.
std::string train_config_hash(const TrainOptions& o, const ResolvedTrain& r,
                              const std::string& data_id) {
  std::ostringstream c;
  c << "data=" << data_id << ";dims=" << r.mcfg.word_dim << ','
    << r.mcfg.char_dim << ',' << r.mcfg.char_hidden << ','
    << r.mcfg.word_hidden << ";lex=" << o.lex_mode << ',' << r.mcfg.lex.dim
    << ',' << o.lex_pooling << ',' << r.mcfg.lex.lowercase_fallback;
  for (const Lexicon& lex : r.lexicons) {
    c << ',' << lex.name << ':' << lex.entry_count();
  }
  c << ";epochs=" << r.tcfg.epochs << ";p=" << o.word_dropout << ','
    << o.dropout_scheme << ";lr=" << r.tcfg.learning_rate
    << ";minfreq=" << r.tcfg.min_freq << ";emb=" << o.embeddings_path;
  const std::string s = c.str();
  return hex64(fnv1a(s.data(), s.size()));
}

// Drops sentences the trainer cannot use (no supervised token).
std::vector<Sentence> supervised_subset(std::span<const ScoredSentence> scored,
                                        std::size_t* dropped = nullptr) {
  std::vector<Sentence> out;
  std::size_t skip = 0;
  for (const ScoredSentence& s : scored) {
    if (s.sentence.unmasked_count() > 0) {
      out.push_back(s.sentence);
    } else {
      ++skip;
    }
  }
  if (dropped) *dropped = skip;
  return out;
}

void emit_predictions(std::ostream& out, std::span<const Sentence> corpus,
                      std::span<const TagSeq> pred, const TagSet& tags) {
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t j = 0; j < corpus[i].size(); ++j) {
      out << corpus[i].tokens[j] << '\t' << tags.name(pred[i][j]) << '\n';
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Subcommand bodies.

int run_project(const std::string& input, const std::string& output,
                std::size_t sources, const std::string& tags_csv) {
  const TagSet tags = make_tagset(tags_csv);
  auto blocks = parse_projection_path(input, tags);
  const std::size_t S = sources > 0 ? sources : observed_source_count(blocks);

  std::vector<ScoredSentence> decoded;
  decoded.reserve(blocks.size());
  for (const ProjectionBlock& b : blocks) {
    ProjectedSentence ps = project_sentence(b, S, tags.size());
    decoded.push_back({ps.to_sentence(), ps.mean_coverage});
  }
  std::ofstream out(output, std::ios::binary);
  if (!out) throw InputError("cannot write " + output);
  write_scored_corpus(out, decoded, tags);
  std::cerr << "decoded " << decoded.size() << " sentences from " << S
            << " sources\n";
  return kExitOk;
}

int run_select(const std::string& input, const std::string& output,
               const std::string& mode, std::size_t k, std::uint64_t seed,
               const std::string& tags_csv) {
  const TagSet tags = make_tagset(tags_csv);
  auto corpus = read_scored_corpus_file(input, tags);
  std::vector<ScoredSentence> picked =
      parse_selection_mode(mode) == SelectionMode::coverage
          ? select_top_k(corpus, k)
          : random_select(corpus, k, seed);
  std::ofstream out(output, std::ios::binary);
  if (!out) throw InputError("cannot write " + output);
  write_scored_corpus(out, picked, tags);
  std::cerr << "selected " << picked.size() << " of " << corpus.size()
            << " sentences\n";
  return kExitOk;
}

int run_train(const TrainOptions& o) {
  if (o.train_path.empty()) throw ConfigError("--train is required");
  ResolvedTrain r = resolve_train(o);

  auto scored = read_scored_corpus_file(o.train_path, r.tags);
  std::size_t dropped = 0;
  std::vector<Sentence> train_corpus = supervised_subset(scored, &dropped);
  if (dropped > 0) {
    std::cerr << "dropped " << dropped
              << " sentences without supervised tokens\n";
  }
  std::vector<Sentence> dev;
  if (!o.dev_path.empty()) dev = parse_corpus_file(o.dev_path, r.tags);

  fs::create_directories(o.out_dir);
  Ledger ledger(o.out_dir + "/runs.tsv");
  const std::string hash = train_config_hash(
      o, r, o.train_path + ":" + std::to_string(train_corpus.size()));

  for (std::uint64_t seed : r.seeds) {
    TrainConfig tcfg = r.tcfg;
    tcfg.seed = seed;
    TrainLog log;
    Model m = train(train_corpus, dev, r.mcfg, tcfg, r.lexicons,
                    r.embeddings ? &*r.embeddings : nullptr, &log);
    m.tags = r.tags;

    const std::string model_path =
        o.out_dir + (r.seeds.size() == 1
                         ? std::string("/model.bin")
                         : "/model.seed" + std::to_string(seed) + ".bin");
    save_model(m, model_path);
    const std::string model_hash = hex64(fnv1a_file(model_path));

    const double final_loss = log.epochs.back().mean_loss;
    std::cout << "seed " << seed << ": final epoch loss "
              << format_double(final_loss);
    ledger.append({hash, train_corpus.size(), 0, seed, "train_loss",
                   format_double(final_loss)});
    if (log.epochs.back().dev_accuracy) {
      std::cout << ", dev accuracy "
                << format_double(*log.epochs.back().dev_accuracy);
      ledger.append({hash, train_corpus.size(), 0, seed, "dev_accuracy",
                     format_double(*log.epochs.back().dev_accuracy)});
    }
    ledger.append(
        {hash, train_corpus.size(), 0, seed, "model_hash", model_hash});
    std::cout << ", model " << model_path << " (fnv1a " << model_hash
              << ")\n";
  }
  return kExitOk;
}

int run_tag(const std::string& model_path, const std::string& input,
            const std::string& output, const std::string& constraints_path) {
  Model m = load_model(model_path);
  auto corpus = parse_corpus_file(input, m.tags);
  if (corpus.empty()) {
    std::cerr << "warning: empty input corpus\n";
  }

  std::vector<TagSeq> pred;
  pred.reserve(corpus.size());
  if (constraints_path.empty()) {
    for (const Sentence& s : corpus) pred.push_back(tag(m, s));
  } else {
    Lexicon dict = load_cli_lexicon(constraints_path, "tc", m.tags);
    for (const Sentence& s : corpus) {
      pred.push_back(tag_with_type_constraints(m, s, dict));
    }
  }
  std::ofstream out(output, std::ios::binary);
  if (!out) throw InputError("cannot write " + output);
  emit_predictions(out, corpus, pred, m.tags);
  return kExitOk;
}

int run_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& model_path, const std::string& train_path,
             const std::vector<std::string>& lexicon_flags,
             const std::string& output, const std::string& tags_csv) {
  TagSet tags = make_tagset(tags_csv);
  Vocab vocab;
  std::vector<Lexicon> lexicons;
  if (!model_path.empty()) {
    Model m = load_model(model_path);
    tags = m.tags;
    vocab = std::move(m.vocab);
    lexicons = std::move(m.lexicons);
  } else if (!train_path.empty()) {
    auto train_corpus = parse_corpus_file(train_path, tags);
    vocab = build_vocab(train_corpus);
  } else {
    throw ConfigError(
        "eval needs --model or --train to define the training vocabulary");
  }
  for (const auto& [name, path] : parse_lexicon_flags(lexicon_flags)) {
    lexicons.push_back(load_cli_lexicon(path, name, tags));
  }

  auto gold = parse_corpus_file(gold_path, tags);
  auto pred_corpus = parse_corpus_file(pred_path, tags);
  if (gold.size() != pred_corpus.size()) {
    throw InputError("gold and prediction corpora differ in sentence count");
  }
  std::vector<TagSeq> pred;
  for (std::size_t i = 0; i < pred_corpus.size(); ++i) {
    if (pred_corpus[i].size() != gold[i].size()) {
      throw InputError("sentence " + std::to_string(i + 1) +
                       " differs in length between gold and prediction");
    }
    TagSeq seq;
    for (std::int32_t t : pred_corpus[i].tags) {
      if (t == kNoTag) {
        throw InputError("prediction corpus has untagged tokens (sentence " +
                         std::to_string(i + 1) + ")");
      }
      seq.push_back(static_cast<std::uint32_t>(t));
    }
    pred.push_back(std::move(seq));
  }

  EvalReport report = oov_split(gold, pred, vocab, lexicons, tags.size());

  std::ofstream out(output, std::ios::binary);
  if (!out) throw InputError("cannot write " + output);
  out << "# token coverage and OOV membership measured on the evaluation "
         "corpus\n";
  out << "# OOV = token absent from the training vocabulary; covered = "
         "present in >= 1 lexicon\n";
  auto row = [&out](const std::string& metric, const Bucket& b) {
    out << metric << '\t'
        << (b.acc() ? format_double(*b.acc()) : std::string("NA")) << '\n';
    out << metric << "_count\t" << b.total << '\n';
  };
  row("accuracy", report.all);
  for (std::size_t t = 0; t < report.per_tag.size(); ++t) {
    row("tag_accuracy_" + tags.name(t), report.per_tag[t]);
  }
  row("oov_accuracy", report.oov);
  row("oov_in_lexicon_accuracy", report.oov_in_lexicon);
  row("oov_not_in_lexicon_accuracy", report.oov_not_in_lexicon);

  std::cout << "accuracy "
            << (report.all.acc() ? format_double(*report.all.acc()) : "NA")
            << " over " << report.all.total << " tokens\n";
  return kExitOk;
}

int run_curve(const TrainOptions& o, const std::string& pool_path,
              const std::string& eval_path, const std::string& sizes_csv,
              std::size_t samples, const std::string& mode_flag,
              std::size_t jobs) {
  if (pool_path.empty() || eval_path.empty()) {
    throw ConfigError("curve needs --pool and --eval");
  }
  ResolvedTrain r = resolve_train(o);
  auto pool = read_scored_corpus_file(pool_path, r.tags);
  auto eval_corpus = parse_corpus_file(eval_path, r.tags);

  CurveSpec spec;
  for (const std::string& s : split(sizes_csv, ',')) {
    spec.sizes.push_back(std::stoull(s));
  }
  if (spec.sizes.empty()) throw ConfigError("--sizes must list at least one k");
  spec.samples = samples;
  spec.seeds = r.seeds;
  spec.mode = parse_selection_mode(mode_flag);
  spec.subset_seed_base = 0x5a3d;
  spec.jobs = jobs;

  fs::create_directories(o.out_dir);
  const std::string ledger_path = o.out_dir + "/runs.tsv";
  Ledger ledger(ledger_path);
  const std::string hash = train_config_hash(
      o, r,
      pool_path + ":" + std::to_string(pool.size()) + ";mode=" + mode_flag);

  // Resumability: completed (k, sample, seed) accuracy rows are reused.
  std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, double> done;
  for (const LedgerRow& row : Ledger::load(ledger_path)) {
    if (row.config == hash && row.metric == "accuracy") {
      done[{row.k, row.sample, row.seed}] = std::stod(row.value);
    }
  }
  std::atomic<std::size_t> reused{0};

  auto run_one = [&](std::size_t k, std::size_t sample, std::uint64_t seed,
                     const std::vector<ScoredSentence>& subset) {
    if (auto it = done.find({k, sample, seed}); it != done.end()) {
      ++reused;
      return it->second;
    }
    std::vector<Sentence> train_corpus = supervised_subset(subset);
    if (train_corpus.empty()) {
      throw InputError("selected subset has no supervised sentences");
    }
    TrainConfig tcfg = r.tcfg;
    tcfg.seed = seed;
    Model m = train(train_corpus, {}, r.mcfg, tcfg, r.lexicons,
                    r.embeddings ? &*r.embeddings : nullptr);
    m.tags = r.tags;
    const double acc = accuracy(eval_corpus, tag_corpus(m, eval_corpus));
    ledger.append({hash, k, sample, seed, "accuracy", format_double(acc)});
    return acc;
  };

  learning_curve(pool, spec, run_one);
  if (reused > 0) {
    std::cerr << "reused " << reused << " completed runs from the ledger\n";
  }

  // The curve summary is recomputed from the ledger alone.
  std::map<std::size_t, std::vector<double>> by_k;
  for (const LedgerRow& row : Ledger::load(ledger_path)) {
    if (row.config == hash && row.metric == "accuracy") {
      by_k[row.k].push_back(std::stod(row.value));
    }
  }
  const std::string curve_path = o.out_dir + "/curve.tsv";
  std::ofstream out(curve_path, std::ios::binary);
  if (!out) throw InputError("cannot write " + curve_path);
  out << "# k\tmean\tstd\tn_runs\n";
  for (std::size_t k : spec.sizes) {
    const auto& accs = by_k[k];
    if (accs.empty()) continue;
    const MeanStd ms = multi_seed(accs);
    out << k << '\t' << format_double(ms.mean) << '\t'
        << format_double(ms.stddev) << '\t' << accs.size() << '\n';
    std::cout << "k=" << k << " mean=" << format_double(ms.mean)
              << " std=" << format_double(ms.stddev) << " n=" << accs.size()
              << '\n';
  }
  return kExitOk;
}

int run_synth(const SynthConfig& cfg, const std::string& out_dir) {
  SynthBundle bundle = synth_generate(cfg);
  synth_write(bundle, out_dir);
  std::size_t test_tokens = 0;
  for (const Sentence& s : bundle.test) test_tokens += s.size();
  std::cout << "wrote " << out_dir << "/{pool.proj.tsv, pool.gold.tsv, "
            << "dev.tsv, test.tsv, lexicon.tsv, embeddings.vec}\n"
            << "pool " << bundle.pool_gold.size() << " sentences, test "
            << bundle.test.size() << " sentences (" << test_tokens
            << " tokens), lexicon " << bundle.lexicon.entry_count()
            << " entries\n";
  return kExitOk;
}

int run_check_grad(double eps, bool corrupt, std::uint64_t seed) {
  if (eps <= 0.0) throw ConfigError("--eps must be positive");
  GradCheckFixture fx = make_grad_check_fixture(seed);
  const double err = model_grad_check(fx.model, fx.corpus, eps, corrupt);
  std::cout << "max relative gradient error: " << format_double(err) << '\n';
  if (err >= 1e-4) {
    std::cerr << "gradient check FAILED (threshold 1e-4)\n";
    return kExitNumeric;
  }
  std::cout << "gradient check passed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distant-supervision POS tagging toolkit"};
  app.require_subcommand(1);

  // project
  auto* project = app.add_subcommand(
      "project", "Decode a multi-source projection file by weighted voting");
  std::string pr_input, pr_output, pr_tags;
  std::size_t pr_sources = 0;
  project->add_option("--input", pr_input, "Projection block file")
      ->required()
      ->check(CLI::ExistingFile);
  project->add_option("--out", pr_output, "Decoded corpus path")->required();
  project->add_option("--sources", pr_sources,
                      "Declared source count (default: derived from file)");
  project->add_option("--tags", pr_tags, "Comma-separated 12-tag inventory");

  // select
  auto* select = app.add_subcommand(
      "select", "Select training instances from a coverage-scored corpus");
  std::string se_input, se_output, se_mode = "coverage", se_tags;
  std::size_t se_k = kDefaultSelectionSize;
  std::uint64_t se_seed = 1;
  select->add_option("--input", se_input, "Scored corpus")
      ->required()
      ->check(CLI::ExistingFile);
  select->add_option("--out", se_output, "Selected corpus path")->required();
  select->add_option("--mode", se_mode, "coverage or random");
  select->add_option("--k", se_k, "Number of sentences to keep");
  select->add_option("--seed", se_seed, "Seed for random mode");
  select->add_option("--tags", se_tags, "Comma-separated 12-tag inventory");

  // train
  auto* train_cmd =
      app.add_subcommand("train", "Train the tagger on a selected corpus");
  TrainOptions tr;
  train_cmd->add_option("--train", tr.train_path, "Training corpus")
      ->check(CLI::ExistingFile);
  add_train_options(train_cmd, &tr);
  train_cmd->set_config("--config", "", "Flat key=value config file");

  // tag
  auto* tag_cmd = app.add_subcommand("tag", "Tag a corpus with a model");
  std::string tg_model, tg_input, tg_output, tg_constraints;
  tag_cmd->add_option("--model", tg_model, "Model file")
      ->required()
      ->check(CLI::ExistingFile);
  tag_cmd->add_option("--input", tg_input, "Corpus to tag")
      ->required()
      ->check(CLI::ExistingFile);
  tag_cmd->add_option("--out", tg_output, "Tagged corpus path")->required();
  tag_cmd->add_option("--type-constraints", tg_constraints,
                      "Tag dictionary restricting decoding")
      ->check(CLI::ExistingFile);

  // eval
  auto* eval_cmd =
      app.add_subcommand("eval", "Score predictions against gold tags");
  std::string ev_gold, ev_pred, ev_model, ev_train, ev_out, ev_tags;
  std::vector<std::string> ev_lexicons;
  eval_cmd->add_option("--gold", ev_gold, "Gold corpus")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", ev_pred, "Predicted corpus")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--model", ev_model,
                       "Model file providing the training vocabulary");
  eval_cmd->add_option("--train", ev_train,
                       "Training corpus to rebuild the vocabulary from");
  eval_cmd->add_option("--lexicon", ev_lexicons,
                       "Lexicon source as name=path (repeatable)");
  eval_cmd->add_option("--out", ev_out, "Report TSV path")->required();
  eval_cmd->add_option("--tags", ev_tags, "Comma-separated 12-tag inventory");

  // curve
  auto* curve_cmd =
      app.add_subcommand("curve", "Learning-curve sweep over training sizes");
  TrainOptions cu;
  std::string cu_pool, cu_eval, cu_sizes, cu_mode = "coverage";
  std::size_t cu_samples = 5, cu_jobs = 1;
  curve_cmd->add_option("--pool", cu_pool, "Scored instance pool")
      ->check(CLI::ExistingFile);
  curve_cmd->add_option("--eval", cu_eval, "Gold corpus to score against")
      ->check(CLI::ExistingFile);
  curve_cmd->add_option("--sizes", cu_sizes, "Comma-separated k values")
      ->required();
  curve_cmd->add_option("--samples", cu_samples,
                        "Random draws per k (random mode)");
  curve_cmd->add_option("--mode", cu_mode, "coverage or random");
  curve_cmd->add_option("--jobs", cu_jobs, "Parallel training workers");
  add_train_options(curve_cmd, &cu);
  curve_cmd->set_config("--config", "", "Flat key=value config file");

  // synth
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic benchmark bundle");
  SynthConfig sy;
  std::string sy_out;
  synth_cmd->add_option("--out", sy_out, "Output directory")->required();
  synth_cmd->add_option("--seed", sy.seed, "Generator seed");
  synth_cmd->add_option("--pool", sy.pool_sentences, "Pool sentence count");
  synth_cmd->add_option("--dev", sy.dev_sentences, "Dev sentence count");
  synth_cmd->add_option("--test", sy.test_sentences, "Test sentence count");
  synth_cmd->add_option("--types", sy.word_types, "Word type count");
  synth_cmd->add_option("--sources", sy.sources, "Projection source count");
  synth_cmd->add_option("--lex-fraction", sy.lexicon_fraction,
                        "Fraction of types entered in the lexicon");
  synth_cmd->add_option("--emb-dim", sy.embedding_dim,
                        "Embedding file dimension");
  synth_cmd->add_option("--vote-base", sy.vote_base,
                        "Vote correctness at zero coverage");
  synth_cmd->add_option("--vote-gain", sy.vote_gain,
                        "Vote correctness slope in coverage");

  // check-grad
  auto* check_cmd = app.add_subcommand(
      "check-grad", "Finite-difference gradient check on a toy model");
  double cg_eps = 1e-5;
  bool cg_corrupt = false;
  std::uint64_t cg_seed = 1;
  check_cmd->add_option("--eps", cg_eps, "Central difference step");
  check_cmd->add_flag("--corrupt", cg_corrupt,
                      "Deliberately corrupt one gradient (must fail)");
  check_cmd->add_option("--seed", cg_seed, "Fixture seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*project) return run_project(pr_input, pr_output, pr_sources, pr_tags);
    if (*select)
      return run_select(se_input, se_output, se_mode, se_k, se_seed, se_tags);
    if (*train_cmd) return run_train(tr);
    if (*tag_cmd) return run_tag(tg_model, tg_input, tg_output, tg_constraints);
    if (*eval_cmd)
      return run_eval(ev_gold, ev_pred, ev_model, ev_train, ev_lexicons,
                      ev_out, ev_tags);
    if (*curve_cmd)
      return run_curve(cu, cu_pool, cu_eval, cu_sizes, cu_samples, cu_mode,
                       cu_jobs);
    if (*synth_cmd) return run_synth(sy, sy_out);
    if (*check_cmd) return run_check_grad(cg_eps, cg_corrupt, cg_seed);
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}
