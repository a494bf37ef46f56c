#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dstag/serialize.hpp"
#include "dstag/synth.hpp"
#include "dstag/tagger.hpp"

using namespace dstag;

namespace {

std::vector<std::string> tag_names() {
  const TagSet ts = TagSet::universal();
  return {ts.names().begin(), ts.names().end()};
}

Sentence tagged(std::vector<std::string> tokens,
                std::vector<std::int32_t> tags) {
  Sentence s;
  s.tokens = std::move(tokens);
  s.tags = std::move(tags);
  s.loss_mask.assign(s.tokens.size(), true);
  for (std::size_t i = 0; i < s.tags.size(); ++i) {
    s.loss_mask[i] = s.tags[i] != kNoTag;
  }
  return s;
}

// Tiny fixed corpus used across the model tests.
std::vector<Sentence> toy_corpus() {
  return {
      tagged({"ada", "vio", "nem"}, {0, 1, 2}),
      tagged({"vio", "kul"}, {1, 3}),
      tagged({"nem", "ada", "zur", "vio"}, {2, 0, 4, 1}),
  };
}

Lexicon toy_morph_lexicon() {
  Lexicon lex;
  lex.name = "morph";
  lex.properties = {"f0", "f1", "f2", "f3"};
  lex.entries.emplace("ada", std::vector<std::uint32_t>{0, 2});
  lex.entries.emplace("vio", std::vector<std::uint32_t>{1});
  lex.entries.emplace("zur", std::vector<std::uint32_t>{3});
  return lex;
}

ModelConfig tiny_config(LexMode mode = LexMode::none) {
  ModelConfig cfg;
  cfg.word_dim = 6;
  cfg.char_dim = 4;
  cfg.char_hidden = 3;
  cfg.word_hidden = 5;
  cfg.lex.mode = mode;
  cfg.lex.dim = 3;
  return cfg;
}

Model tiny_model(LexMode mode = LexMode::none, std::uint64_t seed = 5) {
  Model m;
  m.cfg = tiny_config(mode);
  auto corpus = toy_corpus();
  m.vocab = build_vocab(corpus);
  m.chars = CharVocab::build(corpus);
  if (mode != LexMode::none) m.lexicons = {toy_morph_lexicon()};
  Rng rng(seed);
  m.init_params(rng);
  return m;
}

}  // namespace

TEST_CASE("utf8_codepoints: ascii, multibyte and malformed bytes") {
  CHECK(utf8_codepoints("ab") == std::vector<std::uint32_t>{'a', 'b'});
  CHECK(utf8_codepoints("\xc3\xa9") == std::vector<std::uint32_t>{0xE9});
  CHECK(utf8_codepoints("\xe4\xb8\xad") == std::vector<std::uint32_t>{0x4E2D});
  // Lone continuation byte decodes to the replacement character.
  CHECK(utf8_codepoints("\x80") == std::vector<std::uint32_t>{0xFFFD});
}

TEST_CASE("build_input: dimensions 164 and 644 for the quoted configs") {
  // d_w=64, h_c=50, no lexicon -> 164.
  {
    Model m;
    m.cfg.word_dim = 64;
    m.cfg.char_dim = 8;
    m.cfg.char_hidden = 50;
    m.cfg.word_hidden = 10;
    auto corpus = toy_corpus();
    m.vocab = build_vocab(corpus);
    m.chars = CharVocab::build(corpus);
    Rng rng(1);
    m.init_params(rng);
    CHECK(m.input_dim() == 164);
    Sentence s = toy_corpus()[0];
    CHECK(build_input(m, s, 0, false, nullptr).size() == 164);
  }
  // Adding an embedded Wiktionary-style source (m=12, l=40) -> 644.
  {
    Model m;
    m.cfg.word_dim = 64;
    m.cfg.char_dim = 8;
    m.cfg.char_hidden = 50;
    m.cfg.word_hidden = 10;
    m.cfg.lex.mode = LexMode::embedded;
    m.cfg.lex.dim = 40;
    Lexicon wiki;
    wiki.name = "wiki";
    wiki.properties = tag_names();
    wiki.entries.emplace("ada", std::vector<std::uint32_t>{0});
    m.lexicons = {wiki};
    auto corpus = toy_corpus();
    m.vocab = build_vocab(corpus);
    m.chars = CharVocab::build(corpus);
    Rng rng(1);
    m.init_params(rng);
    CHECK(m.input_dim() == 644);
    Sentence s = toy_corpus()[0];
    CHECK(build_input(m, s, 0, false, nullptr).size() == 644);
  }
}

TEST_CASE("build_input: p = 0 never replaces the word embedding") {
  Model m = tiny_model();
  m.train_cfg.word_dropout = 0.0;
  Sentence s = toy_corpus()[0];
  Rng rng(7);
  const auto base = build_input(m, s, 0, false, nullptr);
  for (int i = 0; i < 200; ++i) {
    CHECK(build_input(m, s, 0, true, &rng) == base);
  }
}

TEST_CASE("word dropout: empirical UNK substitution matches p/(p+f) within 1%") {
  Model m = tiny_model();
  m.train_cfg.word_dropout = 0.25;
  m.train_cfg.dropout_scheme = DropoutScheme::frequency;

  // "vio" appears 3 times in the toy corpus -> P(replace) = .25/3.25.
  const std::string word = "vio";
  REQUIRE(m.vocab.freq_of(word) == 3);
  const double expected =
      unk_replace_prob(DropoutScheme::frequency, 0.25, 3);
  CHECK(expected == doctest::Approx(0.25 / 3.25).epsilon(1e-15));

  Sentence s = tagged({word}, {1});
  const auto with_word = build_input(m, s, 0, false, nullptr);
  Rng rng(123);
  const int trials = 200000;
  int replaced = 0;
  for (int i = 0; i < trials; ++i) {
    replaced += build_input(m, s, 0, true, &rng) != with_word;
  }
  const double freq = static_cast<double>(replaced) / trials;
  CHECK(std::fabs(freq - expected) < 0.01);
}

TEST_CASE("word dropout: fixed-rate scheme replaces at rate p") {
  Model m = tiny_model();
  m.train_cfg.word_dropout = 0.25;
  m.train_cfg.dropout_scheme = DropoutScheme::fixed;
  Sentence s = tagged({"vio"}, {1});
  const auto with_word = build_input(m, s, 0, false, nullptr);
  Rng rng(321);
  const int trials = 200000;
  int replaced = 0;
  for (int i = 0; i < trials; ++i) {
    replaced += build_input(m, s, 0, true, &rng) != with_word;
  }
  CHECK(std::fabs(static_cast<double>(replaced) / trials - 0.25) < 0.01);
}

TEST_CASE("forward: logits shape is |sentence| x 12") {
  Model m = tiny_model();
  Sentence s = tagged({"ada", "vio", "nem", "kul", "zur"}, {0, 1, 2, 3, 4});
  auto logits = forward(m, s);
  REQUIRE(logits.size() == 5);
  for (const auto& row : logits) CHECK(row.size() == 12);
  Sentence empty;
  CHECK_THROWS_AS(forward(m, empty), InputError);
}

TEST_CASE("forward: equals manual bi_encode/concat/bi_encode/project") {
  Model m = tiny_model(LexMode::embedded);
  Sentence s = tagged({"ada", "vio", "zur"}, {0, 1, 4});
  auto logits = forward(m, s);

  // Manual composition from the public pieces.
  std::vector<nn::Vec> xs;
  for (std::size_t i = 0; i < s.size(); ++i) {
    nn::Vec x;
    auto wrow = m.word_emb.row(m.vocab.lookup(s.tokens[i]));
    x.assign(wrow.begin(), wrow.end());

    std::vector<nn::Vec> chars;
    for (std::uint32_t cp : utf8_codepoints(s.tokens[i])) {
      auto crow = m.char_emb.row(m.chars.lookup(cp));
      chars.emplace_back(crow.begin(), crow.end());
    }
    auto trace = nn::bi_encode_run(chars, m.char_enc);
    nn::Vec cfeat = nn::bi_final_states(trace);
    x.insert(x.end(), cfeat.begin(), cfeat.end());

    auto lex = merge_sources(m.lexicons, m.prop_emb, s.tokens[i], m.cfg.lex);
    x.insert(x.end(), lex.begin(), lex.end());
    xs.push_back(std::move(x));
  }
  auto encoded = nn::bi_encode(xs, m.word_enc);
  for (std::size_t i = 0; i < s.size(); ++i) {
    nn::Vec logit(m.out_b.v);
    nn::matvec_acc(m.out_w, encoded[i], logit);
    for (std::size_t t = 0; t < 12; ++t) {
      CHECK(logits[i][t] == doctest::Approx(logit[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward: permuting the tag set permutes logits consistently") {
  Model m = tiny_model();
  Sentence s = tagged({"ada", "vio"}, {0, 1});
  auto base = forward(m, s);

  // Rotate output rows by one.
  Model rotated = m;
  for (std::size_t t = 0; t < 12; ++t) {
    const std::size_t src = (t + 1) % 12;
    for (std::size_t c = 0; c < rotated.out_w.cols(); ++c) {
      rotated.out_w.at(t, c) = m.out_w.at(src, c);
    }
    rotated.out_b[t] = m.out_b[src];
  }
  auto perm = forward(rotated, s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t t = 0; t < 12; ++t) {
      CHECK(perm[i][t] == base[i][(t + 1) % 12]);
    }
  }
}

TEST_CASE("gradients: full model matches finite differences (no lexicon)") {
  Model m = tiny_model(LexMode::none);
  auto corpus = toy_corpus();
  CHECK(model_grad_check(m, corpus, 1e-5) < 1e-6);
}

TEST_CASE("gradients: full model with embedded lexicon features") {
  Model m = tiny_model(LexMode::embedded);
  auto corpus = toy_corpus();
  CHECK(model_grad_check(m, corpus, 1e-5) < 1e-6);
}

TEST_CASE("gradients: n-hot lexicon features are constants") {
  Model m = tiny_model(LexMode::n_hot);
  auto corpus = toy_corpus();
  CHECK(model_grad_check(m, corpus, 1e-5) < 1e-6);
}

TEST_CASE("gradients: mean-pooled lexicon features") {
  Model m = tiny_model(LexMode::embedded);
  m.cfg.lex.pooling = LexPooling::mean;
  Rng rng(9);
  m.init_params(rng);  // reallocate for the smaller input width
  auto corpus = toy_corpus();
  CHECK(model_grad_check(m, corpus, 1e-5) < 1e-6);
}

TEST_CASE("gradients: corrupted analytic gradient is caught (negative control)") {
  Model m = tiny_model();
  auto corpus = toy_corpus();
  CHECK(model_grad_check(m, corpus, 1e-5, true) > 1e-2);
}

TEST_CASE("gradients: masked positions contribute nothing") {
  Model m = tiny_model();
  Sentence masked = tagged({"ada", "vio", "nem"}, {0, 1, 2});
  masked.loss_mask[1] = false;

  const double base_loss = sentence_loss(m, masked, false);
  // The tag stored at a masked position is irrelevant.
  Sentence other_tag = masked;
  other_tag.tags[1] = 7;
  CHECK(sentence_loss(m, other_tag, false) == base_loss);

  // Gradients are bit-identical too.
  auto params = m.params();
  auto grads_with = [&](const Sentence& s) {
    for (auto& p : params) p.grad->fill(0.0);
    sentence_loss(m, s, true);
    std::vector<double> flat;
    for (auto& p : params) {
      flat.insert(flat.end(), p.grad->v.begin(), p.grad->v.end());
    }
    for (auto& p : params) p.grad->fill(0.0);
    return flat;
  };
  CHECK(grads_with(masked) == grads_with(other_tag));
}

TEST_CASE("train: empty and unsupervised corpora are rejected") {
  ModelConfig mcfg = tiny_config();
  TrainConfig tcfg;
  tcfg.epochs = 1;
  CHECK_THROWS_AS(train({}, {}, mcfg, tcfg, {}), InputError);

  std::vector<Sentence> unsupervised{tagged({"a"}, {kNoTag})};
  CHECK_THROWS_AS(train(unsupervised, {}, mcfg, tcfg, {}), InputError);
}

TEST_CASE("train: invalid hyper-parameters are configuration errors") {
  auto corpus = toy_corpus();
  ModelConfig mcfg = tiny_config();
  TrainConfig tcfg;
  tcfg.word_dropout = 1.0;
  CHECK_THROWS_AS(train(corpus, {}, mcfg, tcfg, {}), ConfigError);
  tcfg.word_dropout = 0.25;
  tcfg.epochs = 0;
  CHECK_THROWS_AS(train(corpus, {}, mcfg, tcfg, {}), ConfigError);
}

TEST_CASE("train: small corpus is memorized; same seed is bit-identical") {
  auto corpus = toy_corpus();
  ModelConfig mcfg = tiny_config();
  TrainConfig tcfg;
  tcfg.epochs = 150;
  tcfg.seed = 42;
  tcfg.word_dropout = 0.0;

  TrainLog log;
  Model m = train(corpus, corpus, mcfg, tcfg, {}, nullptr, &log);
  REQUIRE(log.epochs.size() == 150);
  CHECK(log.epochs.back().mean_loss < log.epochs.front().mean_loss);
  REQUIRE(log.epochs.back().dev_accuracy.has_value());
  CHECK(*log.epochs.back().dev_accuracy == 1.0);

  // Determinism: identical seed, identical serialized bytes.
  Model m2 = train(corpus, {}, mcfg, tcfg, {});
  const char* pa = "/tmp/dstag_test_model_a.bin";
  const char* pb = "/tmp/dstag_test_model_b.bin";
  save_model(m, pa);
  save_model(m2, pb);
  CHECK(fnv1a_file(pa) == fnv1a_file(pb));
  std::remove(pa);
  std::remove(pb);
}

TEST_CASE("train: pretrained embeddings initialize the word table") {
  auto corpus = toy_corpus();
  std::ostringstream emb;
  emb << "ada 1 0 0 0 0 0\nvio 0 1 0 0 0 0\n";
  std::istringstream in(emb.str());
  EmbeddingTable table = load_embeddings(in);

  ModelConfig mcfg = tiny_config();
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.learning_rate = 1e-9;  // keep parameters near their initialization
  tcfg.word_dropout = 0.0;
  Model m = train(corpus, {}, mcfg, tcfg, {}, &table);
  const auto row = m.word_emb.row(m.vocab.lookup("ada"));
  CHECK(row[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(row[1] == doctest::Approx(0.0).epsilon(1e-6));
  // A vocab word missing from the table starts at the UNK mean.
  const auto missing = m.word_emb.row(m.vocab.lookup("nem"));
  CHECK(missing[0] == doctest::Approx(0.5).epsilon(1e-6));

  // Dimension mismatch is rejected.
  ModelConfig bad = tiny_config();
  bad.word_dim = 4;
  CHECK_THROWS_AS(train(corpus, {}, bad, tcfg, {}, &table), ConfigError);
}

TEST_CASE("tag: argmax of forward, deterministic, length-preserving") {
  Model m = tiny_model();
  Sentence s = tagged({"ada", "vio", "nem", "kul"}, {0, 1, 2, 3});
  auto pred = tag(m, s);
  REQUIRE(pred.size() == s.size());
  auto logits = forward(m, s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < 12; ++t) {
      if (logits[i][t] > logits[i][best]) best = t;
    }
    CHECK(pred[i] == best);
  }
  CHECK(tag(m, s) == pred);
  Sentence empty;
  CHECK_THROWS_AS(tag(m, empty), InputError);
}

TEST_CASE("type constraints: dictionary words stay inside their tag sets") {
  Model m = tiny_model();
  Lexicon dict;
  dict.name = "wiki";
  dict.properties = tag_names();
  dict.entries.emplace("ada", std::vector<std::uint32_t>{3});       // singleton
  dict.entries.emplace("vio", std::vector<std::uint32_t>{0, 2});

  Sentence s = tagged({"ada", "vio", "nem"}, {0, 1, 2});
  auto constrained = tag_with_type_constraints(m, s, dict);
  auto unconstrained = tag(m, s);

  CHECK(constrained[0] == 3);  // forced by the singleton set
  CHECK((constrained[1] == 0 || constrained[1] == 2));
  CHECK(constrained[2] == unconstrained[2]);  // absent word: plain argmax

  // Constructed logits: prefers VERB overall, dict allows {NOUN, ADJ},
  // NOUN logit > ADJ logit -> NOUN.
  auto logits = forward(m, s);
  const auto* allowed = dict.lookup("vio");
  REQUIRE(allowed);
  std::uint32_t best = (*allowed)[0];
  for (std::uint32_t t : *allowed) {
    if (logits[1][t] > logits[1][best]) best = t;
  }
  CHECK(constrained[1] == best);
}

TEST_CASE("type constraints: property list must equal the tag set") {
  Model m = tiny_model();
  Sentence s = tagged({"ada"}, {0});
  CHECK_THROWS_AS(tag_with_type_constraints(m, s, toy_morph_lexicon()),
                  ConfigError);
}

TEST_CASE("lexicon mode none ignores lexicon content entirely") {
  auto corpus = toy_corpus();
  ModelConfig mcfg = tiny_config(LexMode::none);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.seed = 11;

  Model without = train(corpus, {}, mcfg, tcfg, {});
  Model with = train(corpus, {}, mcfg, tcfg, {toy_morph_lexicon()});
  Sentence s = tagged({"ada", "vio", "zur"}, {0, 1, 4});
  auto la = forward(without, s);
  auto lb = forward(with, s);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(la[i] == lb[i]);
}

TEST_CASE("serialization: bit-exact round trip, version checked") {
  Model m = tiny_model(LexMode::embedded, 77);
  m.train_cfg.seed = 9;
  const char* pa = "/tmp/dstag_roundtrip_a.bin";
  const char* pb = "/tmp/dstag_roundtrip_b.bin";
  save_model(m, pa);
  Model loaded = load_model(pa);
  save_model(loaded, pb);
  CHECK(fnv1a_file(pa) == fnv1a_file(pb));

  // Loaded model behaves identically.
  Sentence s = tagged({"ada", "vio", "nem"}, {0, 1, 2});
  auto la = forward(m, s);
  auto lb = forward(loaded, s);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(la[i] == lb[i]);
  CHECK(loaded.train_cfg.seed == 9);
  CHECK(loaded.lexicons.size() == 1);

  // Not-a-model and truncated files are rejected.
  {
    std::ofstream junk("/tmp/dstag_junk.bin", std::ios::binary);
    junk << "NOTAMODEL";
  }
  CHECK_THROWS_AS(load_model("/tmp/dstag_junk.bin"), InputError);
  std::remove(pa);
  std::remove(pb);
  std::remove("/tmp/dstag_junk.bin");
}
