#pragma once

#include <filesystem>
#include <string>

#include "zodmc/common.hpp"

namespace zodmc {

/// CSV with header x0..x{d−1} and one sample per row; values round-trip exactly.
std::string samples_csv(const Matrix& points);
void write_samples_csv(const std::filesystem::path& path, const Matrix& points);
/// Reads a file written by write_samples_csv. Throws ConfigError on malformed input.
Matrix read_samples_csv(const std::filesystem::path& path);

/// Writes `text`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace zodmc
