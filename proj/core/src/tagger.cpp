#include "dstag/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace dstag {

std::vector<std::uint32_t> utf8_codepoints(std::string_view s) {
  std::vector<std::uint32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b = static_cast<unsigned char>(s[i]);
    std::uint32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (b < 0x80) {
      cp = b;
    } else if ((b >> 5) == 0x6) {
      len = 2;
      cp = b & 0x1F;
    } else if ((b >> 4) == 0xE) {
      len = 3;
      cp = b & 0x0F;
    } else if ((b >> 3) == 0x1E) {
      len = 4;
      cp = b & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (len > 1) {
      if (i + len > s.size()) {
        out.push_back(0xFFFD);
        ++i;
        continue;
      }
      bool ok = true;
      for (std::size_t k = 1; k < len; ++k) {
        const unsigned char cont = static_cast<unsigned char>(s[i + k]);
        if ((cont >> 6) != 0x2) {
          ok = false;
          break;
        }
        cp = (cp << 6) | (cont & 0x3F);
      }
      if (!ok) {
        out.push_back(0xFFFD);
        ++i;
        continue;
      }
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::uint32_t CharVocab::lookup(std::uint32_t cp) const {
  auto it = index.find(cp);
  return it == index.end() ? kUnk : it->second;
}

CharVocab CharVocab::build(std::span<const Sentence> train) {
  std::set<std::uint32_t> seen;
  for (const Sentence& s : train) {
    for (const std::string& tok : s.tokens) {
      for (std::uint32_t cp : utf8_codepoints(tok)) seen.insert(cp);
    }
  }
  CharVocab cv;
  cv.codepoints.assign(seen.begin(), seen.end());
  for (std::uint32_t i = 0; i < cv.codepoints.size(); ++i) {
    cv.index.emplace(cv.codepoints[i], i + 1);
  }
  return cv;
}

double unk_replace_prob(DropoutScheme scheme, double p, std::uint64_t freq) {
  if (scheme == DropoutScheme::fixed) return p;
  if (freq == 0) return p > 0.0 ? 1.0 : 0.0;
  return p / (p + static_cast<double>(freq));
}

void TrainConfig::validate() const {
  if (word_dropout < 0.0 || word_dropout >= 1.0) {
    throw ConfigError("word dropout must lie in [0, 1)");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
}

std::size_t Model::lexicon_dim() const {
  return lexicon_feature_dim(lexicons, cfg.lex);
}

std::size_t Model::input_dim() const {
  return cfg.word_dim + 2 * cfg.char_hidden + lexicon_dim();
}

std::vector<nn::ParamRef> Model::params() {
  std::vector<nn::ParamRef> out;
  auto add = [&](const std::string& name, Tensor& v, Tensor& g) {
    out.push_back({name, &v, &g});
  };
  add("word_emb", word_emb, word_emb_g);
  add("char_emb", char_emb, char_emb_g);

  // Pair value and gradient tensors of the two encoders member by member;
  // for_each_tensor walks both structs in the same order.
  auto add_encoder = [&](const std::string& prefix, nn::BiEncoderParams& v,
                         nn::BiEncoderParams& g) {
    std::vector<std::pair<std::string, Tensor*>> vs, gs;
    nn::for_each_tensor(v, prefix, [&](const std::string& n, Tensor& t) {
      vs.emplace_back(n, &t);
    });
    nn::for_each_tensor(g, prefix, [&](const std::string& n, Tensor& t) {
      gs.emplace_back(n, &t);
    });
    for (std::size_t i = 0; i < vs.size(); ++i) {
      add(vs[i].first, *vs[i].second, *gs[i].second);
    }
  };
  add_encoder("char_enc", char_enc, char_enc_g);
  add_encoder("word_enc", word_enc, word_enc_g);
  add("out_w", out_w, out_w_g);
  add("out_b", out_b, out_b_g);
  for (std::size_t s = 0; s < prop_emb.size(); ++s) {
    add("lex." + lexicons[s].name + ".prop_emb", prop_emb[s], prop_emb_g[s]);
  }
  return out;
}

void Model::init_params(Rng& rng, const EmbeddingTable* pretrained) {
  cfg.lex.validate();
  word_emb = Tensor::mat(vocab.size(), cfg.word_dim);
  word_emb_g = Tensor::mat(vocab.size(), cfg.word_dim);
  char_emb = Tensor::mat(chars.size(), cfg.char_dim);
  char_emb_g = Tensor::mat(chars.size(), cfg.char_dim);
  char_enc = nn::BiEncoderParams::make(cfg.char_dim, cfg.char_hidden);
  char_enc_g = nn::BiEncoderParams::make(cfg.char_dim, cfg.char_hidden);
  word_enc = nn::BiEncoderParams::make(input_dim(), cfg.word_hidden);
  word_enc_g = nn::BiEncoderParams::make(input_dim(), cfg.word_hidden);
  out_w = Tensor::mat(tags.size(), 2 * cfg.word_hidden);
  out_w_g = Tensor::mat(tags.size(), 2 * cfg.word_hidden);
  out_b = Tensor::vec(tags.size());
  out_b_g = Tensor::vec(tags.size());

  nn::glorot_init(word_emb, rng);
  nn::glorot_init(char_emb, rng);
  char_enc.init(rng);
  word_enc.init(rng);
  nn::glorot_init(out_w, rng);
  out_b.fill(0.0);

  prop_emb.clear();
  prop_emb_g.clear();
  if (cfg.lex.mode == LexMode::embedded) {
    for (const Lexicon& lex : lexicons) {
      Tensor e = Tensor::mat(lex.property_count(), cfg.lex.dim);
      nn::glorot_init(e, rng);
      prop_emb.push_back(std::move(e));
      prop_emb_g.push_back(Tensor::mat(lex.property_count(), cfg.lex.dim));
    }
  }

  if (pretrained) {
    if (pretrained->dim != cfg.word_dim) {
      throw ConfigError(
          "pretrained embedding dimension " + std::to_string(pretrained->dim) +
          " does not match word_dim " + std::to_string(cfg.word_dim));
    }
    std::copy(pretrained->unk.begin(), pretrained->unk.end(),
              word_emb.row(0).begin());
    for (std::size_t i = 1; i < vocab.size(); ++i) {
      const std::vector<double>& vec = pretrained->lookup(vocab.words[i]);
      std::copy(vec.begin(), vec.end(), word_emb.row(i).begin());
    }
  }
}

namespace {

struct TokenForward {
  std::uint32_t emb_row = 0;
  std::vector<std::uint32_t> char_rows;
  nn::BiTrace char_trace;
  // Held property sets per source; nullptr when absent. Unused rows of the
  // property embeddings then receive no gradient.
  std::vector<const std::vector<std::uint32_t>*> props;
  nn::Vec x;
};

TokenForward encode_token(const Model& m, const std::string& token,
                          bool training, Rng* rng) {
  TokenForward tf;

  tf.emb_row = m.vocab.lookup(token);
  if (training && m.train_cfg.word_dropout > 0.0) {
    const double prob =
        unk_replace_prob(m.train_cfg.dropout_scheme, m.train_cfg.word_dropout,
                         m.vocab.freqs[tf.emb_row]);
    if (rng && rng->bernoulli(prob)) tf.emb_row = Vocab::kUnk;
  }

  for (std::uint32_t cp : utf8_codepoints(token)) {
    tf.char_rows.push_back(m.chars.lookup(cp));
  }
  std::vector<nn::Vec> char_inputs;
  char_inputs.reserve(tf.char_rows.size());
  for (std::uint32_t r : tf.char_rows) {
    auto row = m.char_emb.row(r);
    char_inputs.emplace_back(row.begin(), row.end());
  }
  tf.char_trace = nn::bi_encode_run(char_inputs, m.char_enc);
  nn::Vec char_feat = nn::bi_final_states(tf.char_trace);

  tf.x.reserve(m.input_dim());
  auto wrow = m.word_emb.row(tf.emb_row);
  tf.x.assign(wrow.begin(), wrow.end());
  tf.x.insert(tf.x.end(), char_feat.begin(), char_feat.end());

  if (m.cfg.lex.mode == LexMode::n_hot || m.cfg.lex.mode == LexMode::embedded) {
    for (std::size_t s = 0; s < m.lexicons.size(); ++s) {
      tf.props.push_back(
          m.lexicons[s].lookup(token, m.cfg.lex.lowercase_fallback));
      std::vector<double> part =
          m.cfg.lex.mode == LexMode::n_hot
              ? n_hot(m.lexicons[s], token, m.cfg.lex.lowercase_fallback)
              : embed_lex(m.lexicons[s], token, m.prop_emb[s], m.cfg.lex);
      tf.x.insert(tf.x.end(), part.begin(), part.end());
    }
  }
  return tf;
}

struct SentenceForward {
  std::vector<TokenForward> tokens;
  nn::BiTrace word_trace;
  std::vector<nn::Vec> encoded;  // word-level outputs per position
  std::vector<nn::Vec> logits;
};

SentenceForward run_forward(const Model& m, const Sentence& s, bool training,
                            Rng* rng) {
  if (s.tokens.empty()) throw InputError("cannot encode an empty sentence");
  SentenceForward sf;
  std::vector<nn::Vec> xs;
  xs.reserve(s.size());
  for (const std::string& tok : s.tokens) {
    sf.tokens.push_back(encode_token(m, tok, training, rng));
    xs.push_back(sf.tokens.back().x);
  }
  sf.word_trace = nn::bi_encode_run(xs, m.word_enc);
  sf.encoded = nn::bi_outputs(sf.word_trace);
  sf.logits.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    nn::Vec logit(m.out_b.v);
    nn::matvec_acc(m.out_w, sf.encoded[i], logit);
    sf.logits[i] = std::move(logit);
  }
  return sf;
}

// Pushes d_logits back through the whole graph, accumulating parameter
// gradients.
void run_backward(Model& m, const Sentence& s, const SentenceForward& sf,
                  const std::vector<nn::Vec>& d_logits) {
  const std::size_t n = s.size();
  const std::size_t hw = m.cfg.word_hidden;
  std::vector<nn::Vec> d_encoded(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_encoded[i].assign(2 * hw, 0.0);
    if (d_logits[i].empty()) continue;
    nn::outer_acc(m.out_w_g, d_logits[i], sf.encoded[i]);
    nn::axpy(1.0, d_logits[i], m.out_b_g.v);
    nn::matvec_t_acc(m.out_w, d_logits[i], d_encoded[i]);
  }

  std::vector<nn::Vec> d_x =
      nn::bi_backward(m.word_enc, m.word_enc_g, sf.word_trace, d_encoded);

  const std::size_t dw = m.cfg.word_dim;
  const std::size_t dc2 = 2 * m.cfg.char_hidden;
  for (std::size_t i = 0; i < n; ++i) {
    const TokenForward& tf = sf.tokens[i];
    std::span<const double> dxi(d_x[i]);

    nn::axpy(1.0, dxi.subspan(0, dw), m.word_emb_g.row(tf.emb_row));

    std::vector<nn::Vec> d_char_inputs = nn::bi_backward_final(
        m.char_enc, m.char_enc_g, tf.char_trace, dxi.subspan(dw, dc2));
    for (std::size_t c = 0; c < tf.char_rows.size(); ++c) {
      nn::axpy(1.0, d_char_inputs[c], m.char_emb_g.row(tf.char_rows[c]));
    }

    if (m.cfg.lex.mode == LexMode::embedded) {
      std::size_t offset = dw + dc2;
      for (std::size_t src = 0; src < m.lexicons.size(); ++src) {
        const std::size_t ml = m.lexicons[src].property_count();
        const std::size_t l = m.cfg.lex.dim;
        const auto* props = tf.props[src];
        if (m.cfg.lex.pooling == LexPooling::concat) {
          if (props) {
            for (std::uint32_t p : *props) {
              nn::axpy(1.0, dxi.subspan(offset + p * l, l),
                       m.prop_emb_g[src].row(p));
            }
          }
          offset += ml * l;
        } else {
          if (props && !props->empty()) {
            const double scale = 1.0 / static_cast<double>(props->size());
            for (std::uint32_t p : *props) {
              nn::Vec scaled(l);
              for (std::size_t j = 0; j < l; ++j) {
                scaled[j] = scale * dxi[offset + j];
              }
              nn::axpy(1.0, scaled, m.prop_emb_g[src].row(p));
            }
          }
          offset += l;
        }
      }
    }
  }
}

}  // namespace

nn::Vec build_input(const Model& m, const Sentence& s, std::size_t position,
                    bool training, Rng* rng) {
  if (position >= s.size()) throw ConfigError("build_input: position out of range");
  return encode_token(m, s.tokens[position], training, rng).x;
}

std::vector<nn::Vec> forward(const Model& m, const Sentence& s) {
  return run_forward(m, s, false, nullptr).logits;
}

double sentence_loss(Model& m, const Sentence& s, bool accumulate_grads,
                     bool training, Rng* rng) {
  SentenceForward sf = run_forward(m, s, training, rng);
  const std::size_t n_unmasked = s.unmasked_count();
  if (n_unmasked == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(n_unmasked);

  double loss = 0.0;
  std::vector<nn::Vec> d_logits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.loss_mask[i]) continue;
    nn::XentResult r = nn::softmax_xent(
        sf.logits[i], static_cast<std::size_t>(s.tags[i]));
    loss += scale * r.loss;
    if (accumulate_grads) {
      for (double& g : r.grad) g *= scale;
      d_logits[i] = std::move(r.grad);
    }
  }
  if (accumulate_grads) run_backward(m, s, sf, d_logits);
  return loss;
}

Model train(std::span<const Sentence> train_corpus,
            std::span<const Sentence> dev_corpus, const ModelConfig& mcfg,
            const TrainConfig& tcfg, std::vector<Lexicon> lexicons,
            const EmbeddingTable* pretrained, TrainLog* log) {
  tcfg.validate();
  if (train_corpus.empty()) throw InputError("empty training corpus");
  for (const Sentence& s : train_corpus) {
    if (s.tokens.empty()) throw InputError("empty sentence in training corpus");
    if (s.unmasked_count() == 0) {
      throw InputError(
          "training sentence with no supervised tokens; filter such "
          "sentences before training");
    }
  }

  Model m;
  m.cfg = mcfg;
  m.train_cfg = tcfg;
  m.vocab = build_vocab(train_corpus, tcfg.min_freq);
  m.chars = CharVocab::build(train_corpus);
  m.lexicons = std::move(lexicons);

  Rng init_rng(mix64(tcfg.seed, 0x1217));
  m.init_params(init_rng, pretrained);
  std::vector<nn::ParamRef> params = m.params();

  Rng rng(mix64(tcfg.seed, 0x7e57));
  std::vector<std::size_t> order(train_corpus.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const double loss =
          sentence_loss(m, train_corpus[idx], true, true, &rng);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch + 1));
      }
      loss_sum += loss;

      double grad_sq = 0.0;
      for (const nn::ParamRef& p : params) {
        for (double g : p.grad->v) grad_sq += g * g;
      }
      if (!std::isfinite(grad_sq)) {
        throw NumericError("non-finite gradient at epoch " +
                           std::to_string(epoch + 1));
      }
      for (const nn::ParamRef& p : params) {
        nn::sgd_step(*p.value, *p.grad, tcfg.learning_rate);
      }
    }

    if (log) {
      EpochLog el;
      el.mean_loss = loss_sum / static_cast<double>(train_corpus.size());
      if (!dev_corpus.empty()) {
        std::size_t correct = 0, total = 0;
        for (const Sentence& s : dev_corpus) {
          std::vector<std::uint32_t> pred = tag(m, s);
          for (std::size_t i = 0; i < s.size(); ++i) {
            if (s.tags[i] == kNoTag) continue;
            ++total;
            correct += pred[i] == static_cast<std::uint32_t>(s.tags[i]);
          }
        }
        if (total > 0) {
          el.dev_accuracy =
              static_cast<double>(correct) / static_cast<double>(total);
        }
      }
      log->epochs.push_back(el);
    }
  }
  return m;
}

std::vector<std::uint32_t> tag(const Model& m, const Sentence& s) {
  std::vector<nn::Vec> logits = forward(m, s);
  std::vector<std::uint32_t> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < logits[i].size(); ++t) {
      if (logits[i][t] > logits[i][best]) best = t;
    }
    out[i] = static_cast<std::uint32_t>(best);
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> tag_corpus(
    const Model& m, std::span<const Sentence> corpus) {
  std::vector<std::vector<std::uint32_t>> out;
  out.reserve(corpus.size());
  for (const Sentence& s : corpus) out.push_back(tag(m, s));
  return out;
}

std::vector<std::uint32_t> tag_with_type_constraints(const Model& m,
                                                     const Sentence& s,
                                                     const Lexicon& dict) {
  std::vector<std::string> tag_names(m.tags.names().begin(),
                                     m.tags.names().end());
  if (dict.properties != tag_names) {
    throw ConfigError(
        "type-constraint dictionary's property list must equal the tag set");
  }
  std::vector<nn::Vec> logits = forward(m, s);
  std::vector<std::uint32_t> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto* allowed =
        dict.lookup(s.tokens[i], m.cfg.lex.lowercase_fallback);
    if (allowed && !allowed->empty()) {
      std::uint32_t best = (*allowed)[0];
      for (std::uint32_t t : *allowed) {
        if (logits[i][t] > logits[i][best]) best = t;
      }
      out[i] = best;
    } else {
      std::size_t best = 0;
      for (std::size_t t = 1; t < logits[i].size(); ++t) {
        if (logits[i][t] > logits[i][best]) best = t;
      }
      out[i] = static_cast<std::uint32_t>(best);
    }
  }
  return out;
}

double model_grad_check(Model& m, std::span<const Sentence> corpus, double eps,
                        bool corrupt_one_gradient) {
  std::vector<nn::ParamRef> params = m.params();
  auto loss = [&m, corpus]() {
    double total = 0.0;
    for (const Sentence& s : corpus) {
      total += sentence_loss(m, s, false, false, nullptr);
    }
    return total;
  };
  auto accumulate = [&m, &params, corpus, corrupt_one_gradient]() {
    for (const nn::ParamRef& p : params) p.grad->fill(0.0);
    for (const Sentence& s : corpus) {
      sentence_loss(m, s, true, false, nullptr);
    }
    if (corrupt_one_gradient && !params.empty()) {
      params.front().grad->v.front() += 1.0;
    }
  };
  return nn::grad_check(params, loss, accumulate, eps);
}

}  // namespace dstag
