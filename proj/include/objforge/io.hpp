#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace objforge::io {

// Whole-file helpers. Missing inputs are a ValidationError; unwritable
// outputs a plain Error.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace objforge::io
