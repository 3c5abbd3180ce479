#pragma once

#include <string>
#include <string_view>

namespace kitclust {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

bool is_sha256_hex(std::string_view s);

}  // namespace kitclust
