#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dstag/corpus.hpp"

namespace dstag {

// Pre-trained word vectors loaded from the whitespace text format:
// one "word v1 ... vd" per line, optional "count dim" header line.
struct EmbeddingTable {
  std::size_t dim = 0;
  StringMap<std::vector<double>> vectors;
  std::vector<double> unk;  // always present

  // Falls back to the UNK vector; never fails.
  const std::vector<double>& lookup(std::string_view word) const;
  bool contains(std::string_view word) const {
    return vectors.find(word) != vectors.end();
  }
};

// A row keyed "<unk>" or "<UNK>" becomes the UNK vector; otherwise UNK is
// synthesized as the componentwise mean of all loaded vectors. Repeated
// words keep the last occurrence (a warning is printed to `warnings` when
// given).
EmbeddingTable load_embeddings(std::istream& in,
                               std::ostream* warnings = nullptr);
EmbeddingTable load_embeddings_file(const std::string& path,
                                    std::ostream* warnings = nullptr);

}  // namespace dstag
