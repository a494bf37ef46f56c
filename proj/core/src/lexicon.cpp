#include "dstag/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

namespace dstag {

const std::vector<std::uint32_t>* Lexicon::lookup(std::string_view word) const {
  auto it = entries.find(word);
  return it == entries.end() ? nullptr : &it->second;
}

const std::vector<std::uint32_t>* Lexicon::lookup(
    std::string_view word, bool lowercase_fallback) const {
  if (const auto* hit = lookup(word)) return hit;
  if (!lowercase_fallback) return nullptr;
  // ASCII-only fallback; non-ASCII bytes pass through unchanged.
  std::string lower(word);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == word) return nullptr;
  return lookup(lower);
}

namespace {

std::vector<std::string> split_props(const std::string& field, long line_no) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= field.size()) {
    std::size_t semi = field.find(';', start);
    std::string prop = field.substr(
        start, semi == std::string::npos ? std::string::npos : semi - start);
    if (prop.empty()) throw InputError("empty property field", line_no);
    out.push_back(std::move(prop));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return out;
}

}  // namespace

Lexicon load_lexicon(std::istream& in, const std::string& source_name,
                     std::vector<std::string> declared_properties) {
  // First pass collects raw (word, property-name) pairs; property indices
  // are assigned afterwards so a derived inventory can be sorted.
  std::vector<std::pair<std::string, std::vector<std::string>>> raw;
  std::set<std::string> seen_props;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InputError("expected 'word<TAB>props'", line_no);
    }
    std::string word = line.substr(0, tab);
    if (word.empty()) throw InputError("empty word", line_no);
    std::vector<std::string> props = split_props(line.substr(tab + 1), line_no);
    for (const std::string& p : props) seen_props.insert(p);
    raw.emplace_back(std::move(word), std::move(props));
  }

  Lexicon lex;
  lex.name = source_name;
  if (declared_properties.empty()) {
    lex.properties.assign(seen_props.begin(), seen_props.end());
  } else {
    lex.properties = std::move(declared_properties);
  }
  StringMap<std::uint32_t> prop_index;
  for (std::uint32_t i = 0; i < lex.properties.size(); ++i) {
    prop_index.emplace(lex.properties[i], i);
  }

  for (auto& [word, props] : raw) {
    std::vector<std::uint32_t>& set = lex.entries[word];
    for (const std::string& p : props) {
      auto it = prop_index.find(p);
      if (it == prop_index.end()) {
        throw InputError("property '" + p + "' not in declared inventory of " +
                         source_name);
      }
      if (std::find(set.begin(), set.end(), it->second) == set.end()) {
        set.push_back(it->second);
      }
    }
    std::sort(set.begin(), set.end());
  }
  return lex;
}

Lexicon load_lexicon_file(const std::string& path,
                          const std::string& source_name,
                          std::vector<std::string> declared_properties) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open lexicon file: " + path);
  return load_lexicon(in, source_name, std::move(declared_properties));
}

void emit_lexicon(std::ostream& out, const Lexicon& lex) {
  std::map<std::string, const std::vector<std::uint32_t>*> sorted;
  for (const auto& [word, props] : lex.entries) sorted.emplace(word, &props);
  for (const auto& [word, props] : sorted) {
    out << word << '\t';
    for (std::size_t i = 0; i < props->size(); ++i) {
      if (i) out << ';';
      out << lex.properties[(*props)[i]];
    }
    out << '\n';
  }
}

void LexiconFeatureConfig::validate() const {
  if (mode == LexMode::embedded && dim == 0) {
    throw ConfigError("embedded lexicon mode requires dim > 0");
  }
}

std::vector<double> n_hot(const Lexicon& lex, std::string_view word,
                          bool lowercase_fallback) {
  std::vector<double> out(lex.property_count(), 0.0);
  if (const auto* props = lex.lookup(word, lowercase_fallback)) {
    for (std::uint32_t p : *props) out[p] = 1.0;
  }
  return out;
}

std::vector<double> embed_lex(const Lexicon& lex, std::string_view word,
                              const Tensor& prop_emb,
                              const LexiconFeatureConfig& cfg) {
  cfg.validate();
  const std::size_t m = lex.property_count(), l = cfg.dim;
  if (prop_emb.rank() != 2 || prop_emb.rows() != m || prop_emb.cols() != l) {
    throw ConfigError("property embedding matrix has wrong shape for " +
                      lex.name);
  }
  const auto* props = lex.lookup(word, cfg.lowercase_fallback);
  if (cfg.pooling == LexPooling::concat) {
    std::vector<double> out(m * l, 0.0);
    if (props) {
      for (std::uint32_t p : *props) {
        auto row = prop_emb.row(p);
        std::copy(row.begin(), row.end(), out.begin() + p * l);
      }
    }
    return out;
  }
  std::vector<double> out(l, 0.0);
  if (props && !props->empty()) {
    for (std::uint32_t p : *props) {
      auto row = prop_emb.row(p);
      for (std::size_t i = 0; i < l; ++i) out[i] += row[i];
    }
    for (double& x : out) x /= static_cast<double>(props->size());
  }
  return out;
}

std::size_t lexicon_feature_dim(const Lexicon& lex,
                                const LexiconFeatureConfig& cfg) {
  switch (cfg.mode) {
    case LexMode::n_hot:
      return lex.property_count();
    case LexMode::embedded:
      return cfg.pooling == LexPooling::concat
                 ? lex.property_count() * cfg.dim
                 : cfg.dim;
    default:
      return 0;
  }
}

std::size_t lexicon_feature_dim(std::span<const Lexicon> lexicons,
                                const LexiconFeatureConfig& cfg) {
  std::size_t total = 0;
  for (const Lexicon& lex : lexicons) total += lexicon_feature_dim(lex, cfg);
  return total;
}

std::vector<double> merge_sources(std::span<const Lexicon> lexicons,
                                  std::span<const Tensor> prop_embs,
                                  std::string_view word,
                                  const LexiconFeatureConfig& cfg) {
  if (lexicons.empty()) throw ConfigError("merge_sources: no sources");
  std::vector<double> out;
  out.reserve(lexicon_feature_dim(lexicons, cfg));
  for (std::size_t s = 0; s < lexicons.size(); ++s) {
    std::vector<double> part;
    if (cfg.mode == LexMode::n_hot) {
      part = n_hot(lexicons[s], word, cfg.lowercase_fallback);
    } else if (cfg.mode == LexMode::embedded) {
      part = embed_lex(lexicons[s], word, prop_embs[s], cfg);
    }
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace dstag
