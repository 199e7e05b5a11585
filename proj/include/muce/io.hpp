#pragma once

#include <string>

namespace muce::io {

void write_bytes(const std::string& path, const std::string& bytes);
std::string read_bytes(const std::string& path);
bool file_exists(const std::string& path);

}  // namespace muce::io
