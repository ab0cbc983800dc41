#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace synthctx {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes; throws IoError when unreadable.
std::string file_sha256(const std::filesystem::path& path);

/// Whole-file read as bytes; throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Whole-file write; throws IoError.
void write_file(const std::filesystem::path& path, std::string_view data);

}  // namespace synthctx
