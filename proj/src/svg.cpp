#include "muce/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "muce/errors.hpp"
#include "muce/io.hpp"

namespace muce::svg {

namespace {

constexpr double kW = 720, kH = 480;
constexpr double kL = 72, kR = 24, kT = 40, kB = 56;  // margins

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '&') o += "&amp;";
        else if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else o += c;
    }
    return o;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void take(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle() {
        if (lo > hi) {
            lo = 0;
            hi = 1;
        } else if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

std::vector<double> ticks_for(const Range& r) {
    const double span = r.hi - r.lo;
    double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
    for (double mul : {1.0, 2.0, 5.0, 10.0}) {
        if (span / (step * mul) <= 7.0) {
            step *= mul;
            break;
        }
    }
    std::vector<double> t;
    for (double v = std::ceil(r.lo / step) * step; v <= r.hi + 1e-9 * span; v += step)
        t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    return t;
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, const std::vector<Series>& series) {
    Range rx, ry;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw DimensionError("svg series '" + s.label + "' has mismatched x/y lengths");
        for (double v : s.x) rx.take(v);
        for (double v : s.y) ry.take(v);
    }
    rx.settle();
    ry.settle();

    auto px = [&](double v) { return kL + (v - rx.lo) / (rx.hi - rx.lo) * (kW - kL - kR); };
    auto py = [&](double v) { return kH - kB - (v - ry.lo) / (ry.hi - ry.lo) * (kH - kT - kB); };

    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW) + "\" height=\"" + fmt(kH) +
         "\" viewBox=\"0 0 " + fmt(kW) + " " + fmt(kH) + "\" font-family=\"sans-serif\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + fmt(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
         esc(title) + "</text>\n";

    for (double t : ticks_for(rx)) {
        const double X = px(t);
        o += "<line x1=\"" + fmt(X) + "\" y1=\"" + fmt(kT) + "\" x2=\"" + fmt(X) + "\" y2=\"" +
             fmt(kH - kB) + "\" stroke=\"#dddddd\"/>\n";
        o += "<text x=\"" + fmt(X) + "\" y=\"" + fmt(kH - kB + 18) +
             "\" text-anchor=\"middle\" font-size=\"11\">" + fmt(t) + "</text>\n";
    }
    for (double t : ticks_for(ry)) {
        const double Y = py(t);
        o += "<line x1=\"" + fmt(kL) + "\" y1=\"" + fmt(Y) + "\" x2=\"" + fmt(kW - kR) + "\" y2=\"" +
             fmt(Y) + "\" stroke=\"#dddddd\"/>\n";
        o += "<text x=\"" + fmt(kL - 6) + "\" y=\"" + fmt(Y + 4) +
             "\" text-anchor=\"end\" font-size=\"11\">" + fmt(t) + "</text>\n";
    }
    o += "<rect x=\"" + fmt(kL) + "\" y=\"" + fmt(kT) + "\" width=\"" + fmt(kW - kL - kR) +
         "\" height=\"" + fmt(kH - kT - kB) + "\" fill=\"none\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt((kL + kW - kR) / 2) + "\" y=\"" + fmt(kH - 12) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + esc(xlabel) + "</text>\n";
    o += "<text x=\"16\" y=\"" + fmt((kT + kH - kB) / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
         fmt((kT + kH - kB) / 2) + ")\">" + esc(ylabel) + "</text>\n";

    for (size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof kPalette / sizeof *kPalette)];
        std::string pts;
        auto flush = [&] {
            if (!pts.empty())
                o += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                     "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
            pts.clear();
        };
        for (size_t i = 0; i < series[s].x.size(); ++i) {
            const double xv = series[s].x[i], yv = series[s].y[i];
            if (!std::isfinite(xv) || !std::isfinite(yv)) {
                flush();
                continue;
            }
            if (!pts.empty()) pts += ' ';
            pts += fmt(px(xv)) + "," + fmt(py(yv));
            o += "<circle cx=\"" + fmt(px(xv)) + "\" cy=\"" + fmt(py(yv)) + "\" r=\"3\" fill=\"" +
                 color + "\"/>\n";
        }
        flush();
        const double ly = kT + 16 + 18 * double(s);
        o += "<line x1=\"" + fmt(kL + 10) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" + fmt(kL + 34) +
             "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        o += "<text x=\"" + fmt(kL + 40) + "\" y=\"" + fmt(ly) + "\" font-size=\"12\">" +
             esc(series[s].label) + "</text>\n";
    }
    o += "</svg>\n";
    io::write_bytes(path, o);
}

void write_position_map(const std::string& path, const std::string& title,
                        const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& value) {
    if (x.size() != y.size() || x.size() != value.size())
        throw DimensionError("position map needs equally long x/y/value lists");
    Range rx, ry, rv;
    for (double v : x) rx.take(v);
    for (double v : y) ry.take(v);
    for (double v : value) rv.take(v);
    rx.settle();
    ry.settle();
    rv.settle();

    auto px = [&](double v) { return kL + (v - rx.lo) / (rx.hi - rx.lo) * (kW - kL - kR); };
    auto py = [&](double v) { return kH - kB - (v - ry.lo) / (ry.hi - ry.lo) * (kH - kT - kB); };

    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW) + "\" height=\"" + fmt(kH) +
         "\" viewBox=\"0 0 " + fmt(kW) + " " + fmt(kH) + "\" font-family=\"sans-serif\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + fmt(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
         esc(title) + "</text>\n";
    o += "<rect x=\"" + fmt(kL) + "\" y=\"" + fmt(kT) + "\" width=\"" + fmt(kW - kL - kR) +
         "\" height=\"" + fmt(kH - kT - kB) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(value[i])) continue;
        const double t = (value[i] - rv.lo) / (rv.hi - rv.lo);
        const int r = int(std::lround(40 + 215 * t));
        const int b = int(std::lround(255 - 215 * t));
        char color[10];
        std::snprintf(color, sizeof color, "#%02x30%02x", r, b);
        o += "<circle cx=\"" + fmt(px(x[i])) + "\" cy=\"" + fmt(py(y[i])) + "\" r=\"4\" fill=\"" +
             color + "\"/>\n";
    }
    o += "<text x=\"" + fmt(kW / 2) + "\" y=\"" + fmt(kH - 12) +
         "\" text-anchor=\"middle\" font-size=\"12\">low " + fmt(rv.lo) + " — high " + fmt(rv.hi) +
         "</text>\n";
    o += "</svg>\n";
    io::write_bytes(path, o);
}

}  // namespace muce::svg
