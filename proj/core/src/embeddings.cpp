#include "dstag/embeddings.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dstag {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) out.push_back(std::move(f));
  return out;
}

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

double parse_double(const std::string& s, long line_no) {
  double x;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw InputError("bad embedding value '" + s + "'", line_no);
  }
  return x;
}

}  // namespace

const std::vector<double>& EmbeddingTable::lookup(std::string_view word) const {
  auto it = vectors.find(word);
  return it == vectors.end() ? unk : it->second;
}

EmbeddingTable load_embeddings(std::istream& in, std::ostream* warnings) {
  EmbeddingTable table;
  std::string line;
  long line_no = 0;
  bool first = true;
  std::vector<double> sum;
  std::size_t loaded = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_ws(line);

    // A first line of exactly two integers is the "count dim" header.
    if (first && fields.size() == 2 && is_integer(fields[0]) &&
        is_integer(fields[1])) {
      first = false;
      continue;
    }
    first = false;

    if (fields.size() < 2) {
      throw InputError("embedding line needs a word and at least one value",
                       line_no);
    }
    std::vector<double> vec(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      vec[i - 1] = parse_double(fields[i], line_no);
    }
    if (table.dim == 0) {
      table.dim = vec.size();
      sum.assign(table.dim, 0.0);
    } else if (vec.size() != table.dim) {
      throw InputError("inconsistent embedding dimension: expected " +
                           std::to_string(table.dim) + ", got " +
                           std::to_string(vec.size()),
                       line_no);
    }
    for (std::size_t i = 0; i < table.dim; ++i) sum[i] += vec[i];
    ++loaded;

    auto [it, fresh] = table.vectors.emplace(fields[0], vec);
    if (!fresh) {
      if (warnings) {
        *warnings << "warning: repeated embedding for '" << fields[0]
                  << "', keeping last occurrence (line " << line_no << ")\n";
      }
      it->second = std::move(vec);
    }
  }

  if (loaded == 0) throw InputError("empty embeddings file");

  auto unk_it = table.vectors.find("<unk>");
  if (unk_it == table.vectors.end()) unk_it = table.vectors.find("<UNK>");
  if (unk_it != table.vectors.end()) {
    table.unk = unk_it->second;
  } else {
    table.unk.resize(table.dim);
    for (std::size_t i = 0; i < table.dim; ++i) {
      table.unk[i] = sum[i] / static_cast<double>(loaded);
    }
  }
  return table;
}

EmbeddingTable load_embeddings_file(const std::string& path,
                                    std::ostream* warnings) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embeddings file: " + path);
  return load_embeddings(in, warnings);
}

}  // namespace dstag
