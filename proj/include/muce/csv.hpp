#pragma once

#include <string>
#include <vector>

namespace muce::csv {

// Shortest round-trip decimal form of a double (%.17g trimmed), '.' decimal
// point, "inf"/"nan" spelled out.
std::string num_field(double v);

// Comma-separated, one header row, LF line endings, no quoting: fields must
// not contain commas, quotes, or line breaks.
void write(const std::string& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);

}  // namespace muce::csv
