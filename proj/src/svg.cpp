#include "firefda/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "firefda/common.hpp"

namespace firefda::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#555555"};
constexpr int kPaletteSize = 8;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Range {
    double lo{0.0}, hi{1.0};
    void expand(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

Range data_range(const std::vector<Series>& series, bool y_axis) {
    Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& s : series)
        for (double v : (y_axis ? s.y : s.x)) r.expand(v);
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) return Range{0.0, 1.0};
    if (r.lo == r.hi) {
        const double pad = r.lo == 0.0 ? 1.0 : std::abs(r.lo) * 0.1;
        return Range{r.lo - pad, r.hi + pad};
    }
    const double pad = 0.04 * (r.hi - r.lo);
    return Range{r.lo - pad, r.hi + pad};
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write(const std::filesystem::path& path, const std::vector<Panel>& panels, int columns,
           int panel_width, int panel_height) {
    if (panels.empty()) throw validation_error("svg::write: no panels");
    columns = std::max(1, std::min<int>(columns, int(panels.size())));
    const int rows = int((panels.size() + std::size_t(columns) - 1) / std::size_t(columns));
    const int width = columns * panel_width;
    const int height = rows * panel_height;

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write " + path.string());

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    const double ml = 58, mr = 14, mt = 30, mb = 42;
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& panel = panels[p];
        const double ox = double(int(p) % columns) * panel_width;
        const double oy = double(int(p) / columns) * panel_height;
        const double x0 = ox + ml, y0 = oy + mt;
        const double pw = panel_width - ml - mr, ph = panel_height - mt - mb;

        const Range xr = data_range(panel.series, false);
        const Range yr = data_range(panel.series, true);
        auto sx = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
        auto sy = [&](double v) { return y0 + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

        out << "<g>\n";
        out << "<text x=\"" << num(ox + panel_width / 2.0) << "\" y=\"" << num(oy + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
               "font-weight=\"bold\">"
            << escape(panel.title) << "</text>\n";

        // Frame and ticks.
        out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(pw)
            << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#333\" "
               "stroke-width=\"1\"/>\n";
        for (int t = 0; t <= 4; ++t) {
            const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
            const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
            const double px = sx(fx), py = sy(fy);
            out << "<line x1=\"" << num(px) << "\" y1=\"" << num(y0 + ph) << "\" x2=\"" << num(px)
                << "\" y2=\"" << num(y0 + ph + 4) << "\" stroke=\"#333\"/>\n";
            out << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + ph + 16)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
                << num(fx) << "</text>\n";
            out << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x0)
                << "\" y2=\"" << num(py) << "\" stroke=\"#333\"/>\n";
            out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py + 3)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(fy)
                << "</text>\n";
        }
        if (yr.lo < 0.0 && yr.hi > 0.0) {
            out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(sy(0.0)) << "\" x2=\""
                << num(x0 + pw) << "\" y2=\"" << num(sy(0.0))
                << "\" stroke=\"#bbb\" stroke-dasharray=\"4,3\"/>\n";
        }
        out << "<text x=\"" << num(x0 + pw / 2.0) << "\" y=\"" << num(y0 + ph + 32)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << escape(panel.x_label) << "</text>\n";
        out << "<text x=\"" << num(ox + 14) << "\" y=\"" << num(y0 + ph / 2.0)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
               "transform=\"rotate(-90 "
            << num(ox + 14) << " " << num(y0 + ph / 2.0) << ")\">" << escape(panel.y_label)
            << "</text>\n";

        int color_idx = 0;
        int legend_row = 0;
        for (const auto& s : panel.series) {
            if (s.x.size() != s.y.size())
                throw validation_error("svg::write: series x/y length mismatch in panel '" +
                                       panel.title + "'");
            const std::string color =
                s.color.empty() ? kPalette[color_idx % kPaletteSize] : s.color;
            ++color_idx;
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
                << num(s.width) << "\" stroke-opacity=\"" << num(s.opacity) << "\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (i) out << ' ';
                out << num(sx(s.x[i])) << ',' << num(sy(s.y[i]));
            }
            out << "\"/>\n";
            if (!s.label.empty()) {
                const double lx = x0 + pw - 10, ly = y0 + 14 + 14 * legend_row;
                out << "<line x1=\"" << num(lx - 28) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
                    << num(lx - 12) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
                    << "\" stroke-width=\"2\"/>\n";
                out << "<text x=\"" << num(lx - 32) << "\" y=\"" << num(ly)
                    << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
                    << escape(s.label) << "</text>\n";
                ++legend_row;
            }
        }
        out << "</g>\n";
    }
    out << "</svg>\n";
}

}  // namespace firefda::svg
