#pragma once

#include <filesystem>
#include <string>

#include "maploop/raster.hpp"

namespace maploop {

// ProbMap <-> 16-bit binary PGM (P5, maxval 65535, big-endian samples);
// value / 65535 is the probability.
ProbMap read_prob_pgm(const std::filesystem::path& path);
void write_prob_pgm(const std::filesystem::path& path, const ProbMap& map);

// BinaryMask <-> 8-bit binary PGM (P5, maxval 255, samples 0 or 255).
// Reading accepts any non-zero sample as 1.
BinaryMask read_mask_pgm(const std::filesystem::path& path);
void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask);

std::string encode_prob_pgm(const ProbMap& map);
ProbMap decode_prob_pgm(const std::string& bytes);

} // namespace maploop
