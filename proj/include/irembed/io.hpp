// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace irembed {

/// Throws IoError when the file cannot be opened or read.
std::string read_file(const std::filesystem::path& file);
/// Writes to a sibling temporary and renames it into place.
void write_file(const std::filesystem::path& file, std::string_view bytes);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& file);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace irembed
