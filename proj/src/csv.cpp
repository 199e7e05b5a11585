#include "muce/csv.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "muce/errors.hpp"
#include "muce/io.hpp"

namespace muce::csv {

std::string num_field(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    if (v == std::floor(v) && std::fabs(v) < 1e15) {  // integral values stay plain
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    // shortest form that parses back exactly
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) break;
    }
    return buf;
}

void write(const std::string& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    auto check = [](const std::string& f) {
        if (f.find_first_of(",\"\r\n") != std::string::npos)
            throw UsageError("csv field needs quoting, which this writer refuses: " + f);
    };
    std::string out;
    for (size_t i = 0; i < header.size(); ++i) {
        check(header[i]);
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw DimensionError("csv row width " + std::to_string(row.size()) +
                                 " does not match header width " + std::to_string(header.size()));
        for (size_t i = 0; i < row.size(); ++i) {
            check(row[i]);
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    io::write_bytes(path, out);
}

}  // namespace muce::csv
