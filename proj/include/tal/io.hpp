#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace tal::io {

// Shortest round-trip decimal representation; identical bytes for identical
// doubles on every run.
std::string format_double(double value);

// Empty string for nullopt, otherwise format_double.
std::string format_optional(const std::optional<double>& value);

// Writes `content` to `<path>.tmp` and renames it over `path`.
// Throws Error(kIo) on failure.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

std::string read_file(const std::filesystem::path& path);

// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace tal::io
