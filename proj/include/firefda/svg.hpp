#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace firefda::svg {

struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string color;  // empty: palette cycle
    std::string label;  // empty: no legend entry
    double width{1.5};
    double opacity{1.0};
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

/// Writes a grid of line-chart panels as a standalone SVG. Output is byte
/// deterministic for identical inputs.
void write(const std::filesystem::path& path, const std::vector<Panel>& panels, int columns = 2,
           int panel_width = 440, int panel_height = 320);

}  // namespace firefda::svg
