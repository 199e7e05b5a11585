#pragma once

#include <string>
#include <vector>

namespace muce::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;  // NaN y values break the line
};

// Self-contained static SVG line chart (no scripts, no external references).
void write_line_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, const std::vector<Series>& series);

// Scatter of values over 2-D positions, color-ramped from the value range.
void write_position_map(const std::string& path, const std::string& title,
                        const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& value);

}  // namespace muce::svg
