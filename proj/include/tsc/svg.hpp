#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "tsc/io.hpp"

// Static SVG 1.1 charts, emitted by hand.
namespace tsc::svg {

struct Series {
    std::string label;
    std::vector<double> values;  // NaN entries are gaps
    std::string color;
    bool dashed = false;
    double width = 1.5;
};

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> p = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                               "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    return p;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

namespace detail {

struct Frame {
    double width = 720, height = 420;
    double left = 60, right = 160, top = 40, bottom = 50;
    double lo = 0, hi = 1;

    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
    double y(double v) const { return top + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

inline void padded_range(double& lo, double& hi) {
    if (!(lo < hi)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
}

inline std::string header(const Frame& f, const std::string& title) {
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(f.width) + "\" height=\"" +
         num(f.height) + "\" viewBox=\"0 0 " + num(f.width) + " " + num(f.height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(f.width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" + escape(title) + "</text>\n";
    return s;
}

inline std::string y_axis(const Frame& f) {
    std::string s;
    s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
         num(f.top + f.plot_h()) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top + f.plot_h()) + "\" x2=\"" + num(f.left + f.plot_w()) +
         "\" y2=\"" + num(f.top + f.plot_h()) + "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = f.lo + (f.hi - f.lo) * k / 4.0;
        const double y = f.y(v);
        s += "<line x1=\"" + num(f.left - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(f.left) + "\" y2=\"" + num(y) +
             "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(y + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + io::format_short(v) + "</text>\n";
    }
    return s;
}

inline std::string legend_entry(const Frame& f, int row, const std::string& label, const std::string& color,
                                bool dashed) {
    const double x = f.left + f.plot_w() + 12;
    const double y = f.top + 14.0 * row + 6;
    std::string s = "<line x1=\"" + num(x) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x + 18) + "\" y2=\"" + num(y) +
                    "\" stroke=\"" + color + "\" stroke-width=\"3\"" +
                    (dashed ? " stroke-dasharray=\"4,3\"" : "") + "/>\n";
    s += "<text x=\"" + num(x + 24) + "\" y=\"" + num(y + 4) + "\" font-family=\"sans-serif\" font-size=\"10\">" +
         escape(label) + "</text>\n";
    return s;
}

}  // namespace detail

/// Grouped bars: one group per category, one bar per series.
inline std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                             const std::vector<Series>& series) {
    detail::Frame f;
    f.lo = 0.0;
    f.hi = 0.0;
    for (const auto& s : series)
        for (double v : s.values)
            if (std::isfinite(v)) {
                f.lo = std::min(f.lo, v);
                f.hi = std::max(f.hi, v);
            }
    if (f.hi <= f.lo) f.hi = f.lo + 1.0;
    f.hi += 0.05 * (f.hi - f.lo);

    std::string s = detail::header(f, title) + detail::y_axis(f);
    const double group_w = f.plot_w() / std::max<std::size_t>(categories.size(), 1);
    const double bar_w = 0.8 * group_w / std::max<std::size_t>(series.size(), 1);
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const double gx = f.left + group_w * c + 0.1 * group_w;
        for (std::size_t k = 0; k < series.size(); ++k) {
            if (c >= series[k].values.size() || !std::isfinite(series[k].values[c])) continue;
            const double v = series[k].values[c];
            const double y0 = f.y(std::max(v, 0.0)), y1 = f.y(std::min(v, 0.0));
            s += "<rect x=\"" + num(gx + bar_w * k) + "\" y=\"" + num(y0) + "\" width=\"" + num(bar_w) +
                 "\" height=\"" + num(y1 - y0) + "\" fill=\"" + series[k].color + "\"/>\n";
        }
        s += "<text x=\"" + num(f.left + group_w * (c + 0.5)) + "\" y=\"" + num(f.top + f.plot_h() + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + escape(categories[c]) +
             "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k)
        s += detail::legend_entry(f, static_cast<int>(k), series[k].label, series[k].color, false);
    s += "</svg>\n";
    return s;
}

/// Line chart over x = 1..n with an optional dashed vertical rule drawn
/// between x = rule_after and x = rule_after + 1.
inline std::string line_chart(const std::string& title, const std::vector<Series>& series, int rule_after = -1) {
    detail::Frame f;
    f.lo = std::numeric_limits<double>::infinity();
    f.hi = -std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values)
            if (std::isfinite(v)) {
                f.lo = std::min(f.lo, v);
                f.hi = std::max(f.hi, v);
            }
    }
    if (!std::isfinite(f.lo)) f.lo = f.hi = 0.0;
    detail::padded_range(f.lo, f.hi);
    const double span = n > 1 ? static_cast<double>(n - 1) : 1.0;
    auto x_of = [&](double i) { return f.left + f.plot_w() * i / span; };

    std::string s = detail::header(f, title) + detail::y_axis(f);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& ser = series[k];
        std::string pts;
        auto flush = [&] {
            if (pts.empty()) return;
            s += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"" + num(ser.width) + "\"" +
                 (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + pts + "\"/>\n";
            pts.clear();
        };
        for (std::size_t i = 0; i < ser.values.size(); ++i) {
            if (!std::isfinite(ser.values[i])) {
                flush();
                continue;
            }
            pts += (pts.empty() ? "" : " ") + num(x_of(static_cast<double>(i))) + "," + num(f.y(ser.values[i]));
        }
        flush();
        s += detail::legend_entry(f, static_cast<int>(k), ser.label, ser.color, ser.dashed);
    }
    if (rule_after >= 0 && n > 1) {
        const double x = x_of(rule_after - 0.5);
        s += "<line x1=\"" + num(x) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(x) + "\" y2=\"" +
             num(f.top + f.plot_h()) + "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
    }
    for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 10)) {
        s += "<text x=\"" + num(x_of(static_cast<double>(i))) + "\" y=\"" + num(f.top + f.plot_h() + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + std::to_string(i + 1) +
             "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace tsc::svg
