#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flatnet/linalg.hpp"

namespace flatnet {

// Minimal SVG writer: scatter groups and polylines in data coordinates
// (first two rows of each matrix), plus a standalone heat map.
class SvgPlot {
public:
    SvgPlot(int width = 640, int height = 480);

    void scatter(const std::string& id, const Matrix& pts, const std::string& color, double radius = 3.0);
    void polyline(const std::string& id, const Matrix& pts, const std::string& color, double width = 1.5);
    void title(const std::string& text) { title_ = text; }

    std::string render() const;
    void save(const std::filesystem::path& path) const;

private:
    struct Layer {
        std::string id;
        Matrix pts;
        std::string color;
        double size;
        bool line;
    };
    int width_;
    int height_;
    std::string title_;
    std::vector<Layer> layers_;
};

// White-to-red heat map of a matrix with values in [0, 1].
std::string heatmap_svg(const Matrix& m, int cell = 4);

}  // namespace flatnet
