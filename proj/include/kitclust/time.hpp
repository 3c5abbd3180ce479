#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace kitclust {

using Timestamp = std::chrono::sys_seconds;

inline constexpr std::chrono::seconds kDay{86400};

// Parses "YYYY-MM-DDThh:mm:ssZ". Throws InputError on anything else,
// including dates before the epoch.
Timestamp parse_utc(std::string_view text);

std::string format_utc(Timestamp t);

// Start of the UTC day containing t.
Timestamp midnight(Timestamp t);

// "YYYY-MM" of the UTC calendar month containing t.
std::string calendar_month(Timestamp t);

}  // namespace kitclust
