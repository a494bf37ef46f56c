#include "dstag/serialize.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace dstag {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'S', 'T', 'A', 'G', 'M', 'D', 'L'};

const char* lex_mode_name(LexMode m) {
  switch (m) {
    case LexMode::none: return "none";
    case LexMode::type_constraints: return "tc";
    case LexMode::n_hot: return "nhot";
    default: return "embed";
  }
}

LexMode lex_mode_from(const std::string& s) {
  if (s == "none") return LexMode::none;
  if (s == "tc") return LexMode::type_constraints;
  if (s == "nhot") return LexMode::n_hot;
  if (s == "embed") return LexMode::embedded;
  throw InputError("unknown lexicon mode '" + s + "'");
}

json header_json(Model& m) {
  json h;
  h["format_version"] = kModelFormatVersion;
  h["model"] = {{"word_dim", m.cfg.word_dim},
                {"char_dim", m.cfg.char_dim},
                {"char_hidden", m.cfg.char_hidden},
                {"word_hidden", m.cfg.word_hidden}};
  h["lex"] = {{"mode", lex_mode_name(m.cfg.lex.mode)},
              {"dim", m.cfg.lex.dim},
              {"pooling",
               m.cfg.lex.pooling == LexPooling::concat ? "concat" : "mean"},
              {"lowercase_fallback", m.cfg.lex.lowercase_fallback}};
  h["train"] = {{"epochs", m.train_cfg.epochs},
                {"word_dropout", m.train_cfg.word_dropout},
                {"dropout_scheme",
                 m.train_cfg.dropout_scheme == DropoutScheme::frequency
                     ? "frequency"
                     : "fixed"},
                {"learning_rate", m.train_cfg.learning_rate},
                {"seed", m.train_cfg.seed},
                {"min_freq", m.train_cfg.min_freq},
                {"selection_size", m.train_cfg.selection_size}};

  h["tags"] = std::vector<std::string>(m.tags.names().begin(),
                                       m.tags.names().end());
  h["vocab"] = {{"words", std::vector<std::string>(m.vocab.words.begin() + 1,
                                                   m.vocab.words.end())},
                {"freqs", std::vector<std::uint64_t>(m.vocab.freqs.begin() + 1,
                                                     m.vocab.freqs.end())}};
  h["chars"] = m.chars.codepoints;

  json lexicons = json::array();
  for (const Lexicon& lex : m.lexicons) {
    json entries = json::array();
    std::map<std::string, const std::vector<std::uint32_t>*> sorted;
    for (const auto& [w, props] : lex.entries) sorted.emplace(w, &props);
    for (const auto& [w, props] : sorted) entries.push_back({w, *props});
    lexicons.push_back(
        {{"name", lex.name}, {"properties", lex.properties},
         {"entries", entries}});
  }
  h["lexicons"] = lexicons;

  json tensors = json::array();
  for (const nn::ParamRef& p : m.params()) {
    tensors.push_back({{"name", p.name}, {"shape", p.value->shape}});
  }
  h["tensors"] = tensors;
  return h;
}

template <class T>
void write_raw(std::ostream& out, const T& x) {
  out.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <class T>
T read_raw(std::istream& in) {
  T x;
  in.read(reinterpret_cast<char*>(&x), sizeof(T));
  if (!in) throw InputError("truncated model file");
  return x;
}

}  // namespace

void save_model(Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model file: " + path);

  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kModelFormatVersion);

  const std::string header = header_json(m).dump();
  write_raw(out, static_cast<std::uint64_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  for (const nn::ParamRef& p : m.params()) {
    out.write(reinterpret_cast<const char*>(p.value->v.data()),
              static_cast<std::streamsize>(p.value->size() * sizeof(double)));
  }
  if (!out) throw InputError("failed writing model file: " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string_view(magic, 8) != std::string_view(kMagic, 8)) {
    throw InputError("not a model file: " + path);
  }
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw InputError("unsupported model format version " +
                     std::to_string(version));
  }
  const auto header_len = read_raw<std::uint64_t>(in);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw InputError("truncated model header");

  json h = json::parse(header);
  Model m;
  m.cfg.word_dim = h["model"]["word_dim"];
  m.cfg.char_dim = h["model"]["char_dim"];
  m.cfg.char_hidden = h["model"]["char_hidden"];
  m.cfg.word_hidden = h["model"]["word_hidden"];
  m.cfg.lex.mode = lex_mode_from(h["lex"]["mode"]);
  m.cfg.lex.dim = h["lex"]["dim"];
  m.cfg.lex.pooling = h["lex"]["pooling"] == "concat" ? LexPooling::concat
                                                      : LexPooling::mean;
  m.cfg.lex.lowercase_fallback = h["lex"]["lowercase_fallback"];
  m.train_cfg.epochs = h["train"]["epochs"];
  m.train_cfg.word_dropout = h["train"]["word_dropout"];
  m.train_cfg.dropout_scheme = h["train"]["dropout_scheme"] == "frequency"
                                   ? DropoutScheme::frequency
                                   : DropoutScheme::fixed;
  m.train_cfg.learning_rate = h["train"]["learning_rate"];
  m.train_cfg.seed = h["train"]["seed"];
  m.train_cfg.min_freq = h["train"]["min_freq"];
  m.train_cfg.selection_size = h["train"]["selection_size"];

  m.tags = TagSet(h["tags"].get<std::vector<std::string>>());

  m.vocab.words = {"<unk>"};
  m.vocab.freqs = {0};
  for (const auto& w : h["vocab"]["words"]) {
    m.vocab.index.emplace(w.get<std::string>(),
                          static_cast<std::uint32_t>(m.vocab.words.size()));
    m.vocab.words.push_back(w.get<std::string>());
  }
  for (const auto& f : h["vocab"]["freqs"]) {
    m.vocab.freqs.push_back(f.get<std::uint64_t>());
  }
  if (m.vocab.freqs.size() != m.vocab.words.size()) {
    throw InputError("corrupt vocab in model header");
  }

  m.chars.codepoints = h["chars"].get<std::vector<std::uint32_t>>();
  for (std::uint32_t i = 0; i < m.chars.codepoints.size(); ++i) {
    m.chars.index.emplace(m.chars.codepoints[i], i + 1);
  }

  for (const auto& jl : h["lexicons"]) {
    Lexicon lex;
    lex.name = jl["name"].get<std::string>();
    lex.properties = jl["properties"].get<std::vector<std::string>>();
    for (const auto& entry : jl["entries"]) {
      lex.entries.emplace(entry[0].get<std::string>(),
                          entry[1].get<std::vector<std::uint32_t>>());
    }
    m.lexicons.push_back(std::move(lex));
  }

  // Allocate parameter tensors, then overwrite with the stored payload.
  Rng dummy(0);
  m.init_params(dummy);

  std::vector<nn::ParamRef> params = m.params();
  const json& tensors = h["tensors"];
  if (tensors.size() != params.size()) {
    throw InputError("model tensor directory does not match architecture");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i]["name"] != params[i].name ||
        tensors[i]["shape"].get<std::vector<std::size_t>>() !=
            params[i].value->shape) {
      throw InputError("tensor mismatch at '" + params[i].name + "'");
    }
    in.read(reinterpret_cast<char*>(params[i].value->v.data()),
            static_cast<std::streamsize>(params[i].value->size() *
                                         sizeof(double)));
    if (!in) throw InputError("truncated tensor payload");
  }
  return m;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file for hashing: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace dstag
