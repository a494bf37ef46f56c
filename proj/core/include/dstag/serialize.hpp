#pragma once

#include <cstdint>
#include <string>

#include "dstag/tagger.hpp"

namespace dstag {

// Single-file model container: magic + format version, a JSON header
// (configs, tag set, vocabularies, embedded lexicons, tensor directory)
// and raw 64-bit tensor payloads. Round-trips bit-exactly.
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(Model& m, const std::string& path);
Model load_model(const std::string& path);

// FNV-1a over a byte sequence / file contents; used to fingerprint models
// and configs.
std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t fnv1a_file(const std::string& path);

}  // namespace dstag
