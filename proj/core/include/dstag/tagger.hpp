#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dstag/corpus.hpp"
#include "dstag/embeddings.hpp"
#include "dstag/lexicon.hpp"
#include "dstag/nn.hpp"
#include "dstag/rng.hpp"

namespace dstag {

// Decodes a UTF-8 string into codepoints; malformed bytes decode to
// U+FFFD so arbitrary input never fails.
std::vector<std::uint32_t> utf8_codepoints(std::string_view s);

// Character inventory derived from the training corpus; unseen codepoints
// map to the reserved UNK character at index 0.
struct CharVocab {
  static constexpr std::uint32_t kUnk = 0;
  std::vector<std::uint32_t> codepoints;  // index i+1 <-> codepoints[i]
  std::unordered_map<std::uint32_t, std::uint32_t> index;

  std::size_t size() const { return codepoints.size() + 1; }
  std::uint32_t lookup(std::uint32_t cp) const;
  static CharVocab build(std::span<const Sentence> train);
};

enum class DropoutScheme {
  frequency,  // replace by UNK with probability p / (p + freq(word))
  fixed,      // replace by UNK with probability p
};

double unk_replace_prob(DropoutScheme scheme, double p, std::uint64_t freq);

struct ModelConfig {
  std::size_t word_dim = 64;
  std::size_t char_dim = 32;
  std::size_t char_hidden = 50;
  std::size_t word_hidden = 100;
  LexiconFeatureConfig lex;
};

struct TrainConfig {
  std::size_t epochs = 10;
  double word_dropout = 0.25;
  DropoutScheme dropout_scheme = DropoutScheme::frequency;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
  std::uint64_t min_freq = 1;
  std::size_t selection_size = 5000;  // k; applied by the selection layer

  void validate() const;
};

// The full tagger: per-token input = word embedding (.) char bi-LSTM final
// states (.) lexicon features, a word-level bi-LSTM over those inputs, and
// a per-position softmax tag classifier.
struct Model {
  ModelConfig cfg;
  TrainConfig train_cfg;
  TagSet tags = TagSet::universal();
  Vocab vocab;
  CharVocab chars;
  std::vector<Lexicon> lexicons;  // declared order; embedded into the model

  // Parameters and their gradient accumulators.
  Tensor word_emb, word_emb_g;  // |V| x word_dim
  Tensor char_emb, char_emb_g;  // |C| x char_dim
  nn::BiEncoderParams char_enc, char_enc_g;
  nn::BiEncoderParams word_enc, word_enc_g;
  Tensor out_w, out_w_g;  // |tags| x 2*word_hidden
  Tensor out_b, out_b_g;
  std::vector<Tensor> prop_emb, prop_emb_g;  // per source, m x l

  std::size_t lexicon_dim() const;
  std::size_t input_dim() const;

  // Stable enumeration used by SGD, the gradient checker and serialization.
  std::vector<nn::ParamRef> params();

  // Allocates and randomly initializes all parameter tensors. When
  // `pretrained` is given, vocabulary rows are copied from it (missing
  // words fall back to its UNK vector) and fine-tuned from there.
  void init_params(Rng& rng, const EmbeddingTable* pretrained = nullptr);
};

// Assembles the input vector for one position. During training the word
// embedding is replaced by the UNK row with the configured word-dropout
// probability; `rng` is only consulted then.
nn::Vec build_input(const Model& m, const Sentence& s, std::size_t position,
                    bool training, Rng* rng);

// Per-position tag logits; no dropout.
std::vector<nn::Vec> forward(const Model& m, const Sentence& s);

// Mean softmax cross-entropy over unmasked positions. Backward accumulates
// into the model's gradient tensors.
double sentence_loss(Model& m, const Sentence& s, bool accumulate_grads,
                     bool training = false, Rng* rng = nullptr);

struct EpochLog {
  double mean_loss = 0.0;
  std::optional<double> dev_accuracy;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
};

// Trains a fresh model for cfg.epochs passes in a seed-determined sentence
// order, one SGD update per sentence; returns the final-epoch model.
Model train(std::span<const Sentence> train_corpus,
            std::span<const Sentence> dev_corpus,  // report-only; may be empty
            const ModelConfig& mcfg, const TrainConfig& tcfg,
            std::vector<Lexicon> lexicons,
            const EmbeddingTable* pretrained = nullptr,
            TrainLog* log = nullptr);

// Argmax decode; ties toward the lower tag index.
std::vector<std::uint32_t> tag(const Model& m, const Sentence& s);
std::vector<std::vector<std::uint32_t>> tag_corpus(
    const Model& m, std::span<const Sentence> corpus);

// Decode-time type constraints: for words present in `dict` the argmax is
// restricted to the word's tag set. The dictionary's property list must
// equal the model's tag set.
std::vector<std::uint32_t> tag_with_type_constraints(const Model& m,
                                                     const Sentence& s,
                                                     const Lexicon& dict);

// Full-model gradient check against central finite differences over a toy
// corpus; returns the max relative error (see nn::grad_check).
double model_grad_check(Model& m, std::span<const Sentence> corpus,
                        double eps, bool corrupt_one_gradient = false);

}  // namespace dstag
