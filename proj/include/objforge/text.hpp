#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace objforge::text {

// Throws DecodeError on malformed UTF-8.
void validate_utf8(std::string_view s);

// NFC normalization of valid UTF-8 input.
std::string nfc(std::string_view s);

// Collapses runs of whitespace to a single space and trims both ends.
std::string normalize_whitespace(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

// Splits a UTF-8 string into code points, one string each.
std::vector<std::string> code_points(std::string_view s);

std::size_t code_point_count(std::string_view s);

bool starts_with_uppercase(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace objforge::text
