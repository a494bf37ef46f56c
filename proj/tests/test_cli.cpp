// End-to-end tests driving the dstag binary (path injected as DSTAG_BIN).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dstag/eval.hpp"
#include "dstag/projection.hpp"
#include "dstag/serialize.hpp"
#include "dstag/tagger.hpp"

namespace fs = std::filesystem;
using namespace dstag;

namespace {

const fs::path kWork = fs::temp_directory_path() / "dstag_cli_tests";

struct CmdResult {
  int code = -1;
  std::string output;
};

CmdResult run_cmd(const std::string& args) {
  static int counter = 0;
  const fs::path cap = kWork / ("cmd_capture_" + std::to_string(counter++));
  const std::string cmd =
      std::string(DSTAG_BIN) + " " + args + " > " + cap.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(cap);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// Shared small bundle; generated once per process.
const fs::path& small_bundle() {
  static const fs::path dir = [] {
    fs::create_directories(kWork);
    const fs::path d = kWork / "bundle";
    auto r = run_cmd("synth --out " + d.string() +
                     " --seed 11 --pool 150 --dev 30 --test 60 --types 200");
    REQUIRE(r.code == 0);
    r = run_cmd("project --input " + (d / "pool.proj.tsv").string() +
                " --out " + (d / "pool.scored.tsv").string() + " --sources 5");
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

const std::string kSmallDims =
    " --dim-word 12 --dim-char 6 --hidden-char 6 --hidden-word 10 ";

}  // namespace

TEST_CASE("synth: same seed gives a byte-identical bundle") {
  fs::create_directories(kWork);
  const fs::path a = kWork / "synth_a", b = kWork / "synth_b",
                 c = kWork / "synth_c";
  const std::string flags = " --seed 5 --pool 80 --dev 10 --test 20 --types 120";
  CHECK(run_cmd("synth --out " + a.string() + flags).code == 0);
  CHECK(run_cmd("synth --out " + b.string() + flags).code == 0);
  CHECK(run_cmd("synth --out " + c.string() +
                " --seed 6 --pool 80 --dev 10 --test 20 --types 120")
            .code == 0);
  bool any_differs_across_seeds = false;
  for (const char* name :
       {"pool.proj.tsv", "pool.gold.tsv", "dev.tsv", "test.tsv",
        "lexicon.tsv", "embeddings.vec"}) {
    CHECK(slurp(a / name) == slurp(b / name));
    any_differs_across_seeds |= slurp(a / name) != slurp(c / name);
  }
  CHECK(any_differs_across_seeds);
}

TEST_CASE("synth: lexicon covers the requested fraction of types within 1%") {
  const fs::path d = kWork / "synth_frac";
  CHECK(run_cmd("synth --out " + d.string() +
                " --seed 2 --pool 40 --dev 5 --test 5 --types 500 "
                "--lex-fraction 0.4")
            .code == 0);
  std::ifstream in(d / "lexicon.tsv");
  std::size_t entries = 0;
  std::string line;
  while (std::getline(in, line)) entries += !line.empty();
  const double fraction = static_cast<double>(entries) / 500.0;
  CHECK(std::fabs(fraction - 0.4) <= 0.01);
}

TEST_CASE("synth + project: decoded accuracy increases with coverage decile") {
  // Full-size bundle so the deciles are well populated.
  const fs::path d = kWork / "decile";
  CHECK(run_cmd("synth --out " + d.string() + " --seed 4").code == 0);
  CHECK(run_cmd("project --input " + (d / "pool.proj.tsv").string() +
                " --out " + (d / "scored.tsv").string() + " --sources 5")
            .code == 0);

  const TagSet tags = TagSet::universal();
  auto scored = read_scored_corpus_file((d / "scored.tsv").string(), tags);
  auto gold = parse_corpus_file((d / "pool.gold.tsv").string(), tags);
  REQUIRE(scored.size() == gold.size());

  std::vector<std::size_t> idx(scored.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].coverage < scored[b].coverage;
  });
  const std::size_t per = idx.size() / 10;
  double prev = -1.0;
  for (int decile = 0; decile < 10; ++decile) {
    std::size_t correct = 0, total = 0;
    for (std::size_t i = decile * per; i < (decile + 1) * per; ++i) {
      const Sentence& s = scored[idx[i]].sentence;
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (s.tags[j] == kNoTag) continue;
        ++total;
        correct += s.tags[j] == gold[idx[i]].tags[j];
      }
    }
    REQUIRE(total > 0);
    const double acc = static_cast<double>(correct) / static_cast<double>(total);
    CHECK(acc > prev);
    prev = acc;
  }
}

TEST_CASE("project: golden three-sentence fixture decodes as hand-computed") {
  fs::create_directories(kWork);
  const fs::path in = kWork / "golden.proj.tsv";
  const fs::path out = kWork / "golden.out.tsv";
  spit(in,
       "#tokens\tder hund bellt\n"
       "0\t0\t1\tDET:1\n"
       "0\t1\t0.5\tNOUN:0.8,VERB:0.2\n"
       "1\t1\t0.5\tNOUN:1\n"
       "\n"
       "#tokens\tx\n"
       "0\t0\t1\tNOUN:0.5,VERB:0.5\n"
       "\n"
       "#tokens\ta b\n"
       "\n");
  CHECK(run_cmd("project --input " + in.string() + " --out " + out.string() +
                " --sources 2")
            .code == 0);
  // Sentence 1: DET by 1.0; NOUN by 0.4+0.5 vs VERB 0.1; "bellt" uncovered.
  //   Coverage: source 0 aligns 2/3, source 1 aligns 1/3 -> mean 0.5.
  // Sentence 2: exact NOUN/VERB tie -> NOUN (lower index); source 0 covers
  //   its only token, source 1 covers nothing -> mean 0.5.
  // Sentence 3: no votes -> everything uncovered, coverage 0.
  CHECK(slurp(out) ==
        "# coverage=0.5\n"
        "der\tDET\n"
        "hund\tNOUN\n"
        "bellt\n"
        "\n"
        "# coverage=0.5\n"
        "x\tNOUN\n"
        "\n"
        "# coverage=0\n"
        "a\n"
        "b\n"
        "\n");
}

TEST_CASE("project: empty input gives an empty output, exit 0") {
  const fs::path in = kWork / "empty.proj.tsv";
  const fs::path out = kWork / "empty.out.tsv";
  spit(in, "");
  CHECK(run_cmd("project --input " + in.string() + " --out " + out.string())
            .code == 0);
  CHECK(slurp(out).empty());
}

TEST_CASE("project: malformed block exits 1 with a line-numbered message") {
  const fs::path in = kWork / "bad.proj.tsv";
  spit(in, "#tokens\ta b\n0\t7\t0.5\tNOUN:1\n\n");
  auto r = run_cmd("project --input " + in.string() + " --out " +
                   (kWork / "bad.out.tsv").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("line 2") != std::string::npos);
}

TEST_CASE("select: coverage mode equals the library oracle; k=0 empty") {
  const fs::path& d = small_bundle();
  const fs::path out = kWork / "sel_cov.tsv";
  CHECK(run_cmd("select --input " + (d / "pool.scored.tsv").string() +
                " --mode coverage --k 40 --out " + out.string())
            .code == 0);
  const TagSet tags = TagSet::universal();
  auto pool = read_scored_corpus_file((d / "pool.scored.tsv").string(), tags);
  auto expect = select_top_k(pool, 40);
  auto got = read_scored_corpus_file(out.string(), tags);
  REQUIRE(got.size() == expect.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].coverage == expect[i].coverage);
    CHECK(got[i].sentence.tokens == expect[i].sentence.tokens);
  }

  const fs::path empty_out = kWork / "sel_zero.tsv";
  CHECK(run_cmd("select --input " + (d / "pool.scored.tsv").string() +
                " --mode coverage --k 0 --out " + empty_out.string())
            .code == 0);
  CHECK(slurp(empty_out).empty());
}

TEST_CASE("select: random mode is deterministic per seed") {
  const fs::path& d = small_bundle();
  const fs::path a = kWork / "sel_r1.tsv", b = kWork / "sel_r2.tsv",
                 c = kWork / "sel_r3.tsv";
  const std::string base = "select --input " +
                           (d / "pool.scored.tsv").string() +
                           " --mode random --k 30 --out ";
  CHECK(run_cmd(base + a.string() + " --seed 9").code == 0);
  CHECK(run_cmd(base + b.string() + " --seed 9").code == 0);
  CHECK(run_cmd(base + c.string() + " --seed 10").code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("train: writes model and ledger; seed repetition reproduces hash") {
  const fs::path& d = small_bundle();
  const fs::path sel = kWork / "train_sel.tsv";
  CHECK(run_cmd("select --input " + (d / "pool.scored.tsv").string() +
                " --mode coverage --k 40 --out " + sel.string())
            .code == 0);

  const fs::path run1 = kWork / "run1", run2 = kWork / "run2";
  const std::string train_cmd = "train --train " + sel.string() + kSmallDims +
                                "--epochs 3 --seeds 7 --out ";
  auto r1 = run_cmd(train_cmd + run1.string());
  CHECK(r1.code == 0);
  CHECK(fs::exists(run1 / "model.bin"));
  CHECK(fs::exists(run1 / "runs.tsv"));
  auto r2 = run_cmd(train_cmd + run2.string());
  CHECK(r2.code == 0);
  CHECK(fnv1a_file((run1 / "model.bin").string()) ==
        fnv1a_file((run2 / "model.bin").string()));
  // The ledger records train_loss and model_hash rows.
  const std::string ledger = slurp(run1 / "runs.tsv");
  CHECK(ledger.find("train_loss") != std::string::npos);
  CHECK(ledger.find("model_hash") != std::string::npos);
}

TEST_CASE("train: missing embeddings path is a config error (exit 1)") {
  const fs::path& d = small_bundle();
  const fs::path sel = kWork / "train_sel.tsv";
  auto r = run_cmd("train --train " + sel.string() +
                   " --embeddings /nonexistent/embeddings.vec --out " +
                   (kWork / "run_bad").string());
  CHECK(r.code == 1);
}

TEST_CASE("train: flat key=value config file with flag overrides") {
  const fs::path& d = small_bundle();
  const fs::path sel = kWork / "train_sel.tsv";
  const fs::path cfg = kWork / "preset.cfg";
  spit(cfg,
       "epochs=2\n"
       "seeds=5\n"
       "dim-word=12\n"
       "dim-char=6\n"
       "hidden-char=6\n"
       "hidden-word=10\n"
       "lex-mode=none\n");
  const fs::path run = kWork / "run_cfg";
  auto r = run_cmd("train --train " + sel.string() + " --config " +
                   cfg.string() + " --out " + run.string());
  CHECK(r.code == 0);
  CHECK(slurp(run / "runs.tsv").find("\t5\t") != std::string::npos);
  Model m = load_model((run / "model.bin").string());
  CHECK(m.cfg.word_dim == 12);
  CHECK(m.train_cfg.epochs == 2);
  CHECK(m.train_cfg.seed == 5);
}

TEST_CASE("tag: output round-trips; untagged input accepted") {
  const fs::path& d = small_bundle();
  const fs::path model = kWork / "run1" / "model.bin";
  REQUIRE(fs::exists(model));

  // Strip tags from the test corpus.
  const TagSet tags = TagSet::universal();
  auto test_corpus = parse_corpus_file((d / "test.tsv").string(), tags);
  const fs::path untagged = kWork / "untagged.tsv";
  {
    std::ofstream out(untagged);
    for (auto& s : test_corpus) {
      for (auto& t : s.tokens) out << t << '\n';
      out << '\n';
    }
  }
  const fs::path pred = kWork / "pred.tsv";
  CHECK(run_cmd("tag --model " + model.string() + " --input " +
                untagged.string() + " --out " + pred.string())
            .code == 0);
  auto parsed = parse_corpus_file(pred.string(), tags);
  REQUIRE(parsed.size() == test_corpus.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].tokens == test_corpus[i].tokens);
    for (std::int32_t t : parsed[i].tags) CHECK(t != kNoTag);
  }
}

TEST_CASE("tag: type-constrained output obeys the dictionary") {
  const fs::path& d = small_bundle();
  const fs::path model = kWork / "run1" / "model.bin";
  const fs::path pred = kWork / "pred_tc.tsv";
  CHECK(run_cmd("tag --model " + model.string() + " --input " +
                (d / "test.tsv").string() + " --out " + pred.string() +
                " --type-constraints " + (d / "lexicon.tsv").string())
            .code == 0);

  const TagSet tags = TagSet::universal();
  std::vector<std::string> names(tags.names().begin(), tags.names().end());
  Lexicon dict =
      load_lexicon_file((d / "lexicon.tsv").string(), "synth", names);
  auto parsed = parse_corpus_file(pred.string(), tags);
  std::size_t constrained_tokens = 0;
  for (const Sentence& s : parsed) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const auto* allowed = dict.lookup(s.tokens[j]);
      if (!allowed) continue;
      ++constrained_tokens;
      CHECK(std::find(allowed->begin(), allowed->end(),
                      static_cast<std::uint32_t>(s.tags[j])) != allowed->end());
    }
  }
  CHECK(constrained_tokens > 0);
}

TEST_CASE("eval: end-to-end fixture with hand-computed buckets") {
  fs::create_directories(kWork);
  const fs::path train = kWork / "ev_train.tsv";
  const fs::path gold = kWork / "ev_gold.tsv";
  const fs::path pred = kWork / "ev_pred.tsv";
  const fs::path lex = kWork / "ev_lex.tsv";
  const fs::path report = kWork / "ev_report.tsv";
  spit(train, "seen\tNOUN\n\n");
  spit(gold, "seen\tNOUN\ninlex\tVERB\noutlex\tADJ\n\n");
  spit(pred, "seen\tNOUN\ninlex\tVERB\noutlex\tNOUN\n\n");
  spit(lex, "inlex\tVERB\n");

  auto r = run_cmd("eval --gold " + gold.string() + " --pred " + pred.string() +
                   " --train " + train.string() + " --lexicon w=" +
                   lex.string() + " --out " + report.string());
  CHECK(r.code == 0);
  const std::string rep = slurp(report);
  CHECK(rep.find("# token coverage") != std::string::npos);
  CHECK(rep.find("accuracy\t0.6666666666666666\n") != std::string::npos);
  CHECK(rep.find("oov_in_lexicon_accuracy\t1\n") != std::string::npos);
  CHECK(rep.find("oov_not_in_lexicon_accuracy\t0\n") != std::string::npos);
  CHECK(rep.find("oov_accuracy\t0.5\n") != std::string::npos);
}

TEST_CASE("eval: mismatched corpora exit nonzero") {
  const fs::path gold = kWork / "ev_gold2.tsv";
  const fs::path pred = kWork / "ev_pred2.tsv";
  spit(gold, "a\tNOUN\nb\tVERB\n\n");
  spit(pred, "a\tNOUN\n\n");
  auto r = run_cmd("eval --gold " + gold.string() + " --pred " + pred.string() +
                   " --train " + gold.string() + " --out " +
                   (kWork / "ev_report2.tsv").string());
  CHECK(r.code == 1);
}

TEST_CASE("curve: run bookkeeping, resumability and exact aggregates") {
  const fs::path& d = small_bundle();
  const fs::path out = kWork / "curve_out";
  const std::string cmd = "curve --pool " + (d / "pool.scored.tsv").string() +
                          " --eval " + (d / "dev.tsv").string() +
                          " --sizes 10,20 --samples 2 --seeds 1,2 "
                          "--mode random --jobs 2 --epochs 2" +
                          kSmallDims + "--out " + out.string();
  auto r = run_cmd(cmd);
  CHECK(r.code == 0);

  // 2 sizes x 2 samples x 2 seeds accuracy rows.
  std::size_t acc_rows = 0;
  {
    std::ifstream in(out / "runs.tsv");
    std::string line;
    while (std::getline(in, line)) {
      acc_rows += line.find("\taccuracy\t") != std::string::npos;
    }
  }
  CHECK(acc_rows == 8);

  // Rerun: everything is reused, no new rows.
  auto r2 = run_cmd(cmd);
  CHECK(r2.code == 0);
  CHECK(r2.output.find("reused 8") != std::string::npos);
  std::size_t acc_rows_after = 0;
  {
    std::ifstream in(out / "runs.tsv");
    std::string line;
    while (std::getline(in, line)) {
      acc_rows_after += line.find("\taccuracy\t") != std::string::npos;
    }
  }
  CHECK(acc_rows_after == acc_rows);

  // Summary means recompute exactly from the ledger rows.
  std::map<std::size_t, std::vector<double>> by_k;
  {
    std::ifstream in(out / "runs.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string cfg, metric, value;
      std::size_t k, sample;
      std::uint64_t seed;
      ss >> cfg >> k >> sample >> seed >> metric >> value;
      if (metric == "accuracy") by_k[k].push_back(std::stod(value));
    }
  }
  std::ifstream curve(out / "curve.tsv");
  std::string line;
  std::getline(curve, line);  // header
  while (std::getline(curve, line)) {
    std::istringstream ss(line);
    std::size_t k, n;
    std::string mean_s, std_s;
    ss >> k >> mean_s >> std_s >> n;
    REQUIRE(by_k.count(k) == 1);
    const MeanStd ms = multi_seed(by_k[k]);
    CHECK(format_double(ms.mean) == mean_s);
    CHECK(format_double(ms.stddev) == std_s);
    CHECK(n == by_k[k].size());
  }
}

TEST_CASE("curve: coverage mode collapses samples") {
  const fs::path& d = small_bundle();
  const fs::path out = kWork / "curve_cov";
  auto r = run_cmd("curve --pool " + (d / "pool.scored.tsv").string() +
                   " --eval " + (d / "dev.tsv").string() +
                   " --sizes 15 --samples 5 --seeds 1,2,3 "
                   "--mode coverage --epochs 2" +
                   kSmallDims + "--out " + out.string());
  CHECK(r.code == 0);
  std::size_t acc_rows = 0;
  std::ifstream in(out / "runs.tsv");
  std::string line;
  while (std::getline(in, line)) {
    acc_rows += line.find("\taccuracy\t") != std::string::npos;
  }
  CHECK(acc_rows == 3);  // top-k is deterministic: one sample, 3 seeds
}

TEST_CASE("check-grad: passes by default, fails when corrupted, validates eps") {
  CHECK(run_cmd("check-grad").code == 0);
  CHECK(run_cmd("check-grad --corrupt").code == 2);
  CHECK(run_cmd("check-grad --eps 0").code == 1);
}
