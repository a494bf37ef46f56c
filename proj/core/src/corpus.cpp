#include "dstag/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace dstag {

TagSet TagSet::universal() {
  return TagSet({"NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM",
                 "CONJ", "PRT", "PUNCT", "X"});
}

TagSet::TagSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() != kTagCount) {
    throw ConfigError("tag set must contain exactly 12 tags, got " +
                      std::to_string(names_.size()));
  }
  for (std::uint32_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ConfigError("empty tag name");
    if (!index_.emplace(names_[i], i).second) {
      throw ConfigError("duplicate tag name: " + names_[i]);
    }
  }
}

std::optional<std::uint32_t> TagSet::index(std::string_view name) const {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  if (name == ".") {
    auto punct = index_.find("PUNCT");
    if (punct != index_.end()) return punct->second;
  }
  return std::nullopt;
}

bool Sentence::has_tags() const {
  for (std::int32_t t : tags) {
    if (t != kNoTag) return true;
  }
  return false;
}

std::size_t Sentence::unmasked_count() const {
  std::size_t n = 0;
  for (bool m : loss_mask) n += m;
  return n;
}

std::vector<Sentence> parse_corpus(std::istream& in, const TagSet& tags) {
  std::vector<Sentence> corpus;
  Sentence cur;
  std::string line;
  long line_no = 0;

  auto flush = [&] {
    if (!cur.tokens.empty()) {
      corpus.push_back(std::move(cur));
      cur = Sentence{};
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;

    const std::size_t tab = line.find('\t');
    std::string token = line.substr(0, tab);
    if (token.empty()) throw InputError("empty token", line_no);

    std::int32_t tag = kNoTag;
    if (tab != std::string::npos) {
      std::string tag_name = line.substr(tab + 1);
      if (tag_name.empty()) throw InputError("empty tag field", line_no);
      auto idx = tags.index(tag_name);
      if (!idx) throw InputError("unknown tag '" + tag_name + "'", line_no);
      tag = static_cast<std::int32_t>(*idx);
    }
    cur.tokens.push_back(std::move(token));
    cur.tags.push_back(tag);
    cur.loss_mask.push_back(tag != kNoTag);
  }
  flush();
  return corpus;
}

std::vector<Sentence> parse_corpus_file(const std::string& path,
                                        const TagSet& tags) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file: " + path);
  return parse_corpus(in, tags);
}

void emit_corpus(std::ostream& out, std::span<const Sentence> corpus,
                 const TagSet& tags) {
  for (const Sentence& s : corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << s.tokens[i];
      if (s.tags[i] != kNoTag) {
        out << '\t' << tags.name(static_cast<std::size_t>(s.tags[i]));
      }
      out << '\n';
    }
    out << '\n';
  }
}

std::uint32_t Vocab::lookup(std::string_view w) const {
  auto it = index.find(w);
  return it == index.end() ? kUnk : it->second;
}

std::uint64_t Vocab::freq_of(std::string_view w) const {
  auto it = index.find(w);
  return it == index.end() ? 0 : freqs[it->second];
}

Vocab build_vocab(std::span<const Sentence> train, std::uint64_t min_freq) {
  // Count in first-occurrence order so indices are run-stable.
  std::vector<std::string> order;
  StringMap<std::uint64_t> counts;
  for (const Sentence& s : train) {
    for (const std::string& w : s.tokens) {
      auto [it, fresh] = counts.emplace(w, 0);
      if (fresh) order.push_back(w);
      ++it->second;
    }
  }

  Vocab v;
  v.words.push_back("<unk>");
  v.freqs.push_back(0);
  for (const std::string& w : order) {
    const std::uint64_t f = counts.find(w)->second;
    if (f < min_freq) continue;
    v.index.emplace(w, static_cast<std::uint32_t>(v.words.size()));
    v.words.push_back(w);
    v.freqs.push_back(f);
  }
  return v;
}

}  // namespace dstag
