#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace genad::io {

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so a
/// reader never observes a partially written file.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// zlib CRC-32 of a byte range.
std::uint32_t crc32(std::string_view bytes, std::uint32_t seed = 0);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace genad::io
