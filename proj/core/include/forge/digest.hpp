#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace forge {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Reads a whole file; throws Error(kIo) when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace forge
