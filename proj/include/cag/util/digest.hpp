#pragma once

#include <string>
#include <string_view>

namespace cag::util {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
// Throws DataError if the file cannot be read.
std::string file_sha256(const std::string& path);

}  // namespace cag::util
