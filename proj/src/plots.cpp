#include "exqr/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace exqr {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 360.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 40.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
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

std::string open_svg(const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n"
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
           "</text>\n";
}

std::string axes() {
    const double x0 = kLeft, y0 = kHeight - kBottom;
    return "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(kWidth - kRight) + "\" y2=\"" + num(y0) +
           "\" stroke=\"black\"/>\n<line x1=\"" + num(x0) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(x0) +
           "\" y2=\"" + num(y0) + "\" stroke=\"black\"/>\n";
}

const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
    return colors[i % 7];
}

}  // namespace

std::string svg_evi_histogram(const EviSummary& summary, const std::string& title) {
    std::string svg = open_svg(title) + axes();
    const std::size_t bars = summary.bins.size() + 1;
    std::size_t peak = summary.overflow;
    for (auto c : summary.bins) peak = std::max(peak, c);
    peak = std::max<std::size_t>(peak, 1);
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    const double bar_w = plot_w / static_cast<double>(bars);
    for (std::size_t b = 0; b < bars; ++b) {
        const std::size_t count = b < summary.bins.size() ? summary.bins[b] : summary.overflow;
        const double h = plot_h * static_cast<double>(count) / static_cast<double>(peak);
        const double x = kLeft + bar_w * static_cast<double>(b);
        svg += "<rect x=\"" + num(x + 1) + "\" y=\"" + num(kHeight - kBottom - h) + "\" width=\"" + num(bar_w - 2) +
               "\" height=\"" + num(h) + "\" fill=\"" + (b < summary.bins.size() ? "#4c72b0" : "#999999") + "\"/>\n";
        if (b % 4 == 0 || b == bars - 1) {
            const std::string label = b < summary.bins.size() ? num(static_cast<double>(b) * EviSummary::kBinWidth) : ">1";
            svg += "<text x=\"" + num(x) + "\" y=\"" + num(kHeight - kBottom + 16) + "\">" + label + "</text>\n";
        }
    }
    const double mx = kLeft + plot_w * std::min(summary.median, 1.0) * (static_cast<double>(summary.bins.size()) /
                                                                       static_cast<double>(bars));
    svg += "<line x1=\"" + num(mx) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(mx) + "\" y2=\"" +
           num(kHeight - kBottom) + "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
    char caption[96];
    std::snprintf(caption, sizeof caption, "median %.3f, n = %zu", summary.median, summary.count);
    svg += "<text x=\"" + num(mx + 4) + "\" y=\"" + num(kTop + 12) + "\" fill=\"#d62728\">" + caption + "</text>\n";
    svg += "<text x=\"8\" y=\"" + num(kTop - 8) + "\">count (max " + std::to_string(peak) + ")</text>\n";
    return svg + "</svg>\n";
}

std::string svg_prediction_series(std::span<const double> observed, const PredictionTable& table,
                                  const std::string& title) {
    std::string svg = open_svg(title) + axes();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    auto extend = [&](double v) {
        if (v > 0.0 && std::isfinite(v)) {
            lo = std::min(lo, std::log10(v));
            hi = std::max(hi, std::log10(v));
        }
    };
    for (double v : observed) extend(v);
    for (const auto& s : table.series)
        for (double v : s.values) extend(v);
    if (!(lo <= hi)) return svg + "</svg>\n";
    if (hi - lo < 1e-9) hi = lo + 1.0;

    const std::size_t n = observed.size();
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    auto px = [&](std::size_t i) { return kLeft + plot_w * (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5); };
    auto py = [&](double v) { return kHeight - kBottom - plot_h * (std::log10(v) - lo) / (hi - lo); };
    auto polyline = [&](std::span<const double> values, const char* color, const char* dash) {
        std::string pts;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] > 0.0)) continue;
            pts += num(px(i)) + "," + num(py(values[i])) + " ";
        }
        return "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1\"" +
               (dash[0] ? " stroke-dasharray=\"" + std::string(dash) + "\"" : std::string()) + " points=\"" + pts +
               "\"/>\n";
    };
    svg += polyline(observed, "#444444", "");
    double legend_y = kTop + 4;
    svg += "<text x=\"" + num(kWidth - 230) + "\" y=\"" + num(legend_y) + "\" fill=\"#444444\">observed</text>\n";
    for (std::size_t j = 0; j < table.series.size(); ++j) {
        const auto& s = table.series[j];
        const char* dash = s.method == Method::conventional ? "5 3" : "";
        svg += polyline(s.values, palette(j), dash);
        legend_y += 14;
        char label[64];
        std::snprintf(label, sizeof label, "%s %.4f", std::string(method_name(s.method)).c_str(), s.level.value());
        svg += "<text x=\"" + num(kWidth - 230) + "\" y=\"" + num(legend_y) + "\" fill=\"" + palette(j) + "\">" +
               label + "</text>\n";
    }
    svg += "<text x=\"8\" y=\"" + num(kTop - 8) + "\">log10 mm/day, " + num(lo) + " to " + num(hi) + "</text>\n";
    return svg + "</svg>\n";
}

}  // namespace exqr
