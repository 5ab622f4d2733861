#include "flatnet/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "flatnet/error.hpp"

namespace flatnet {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace

SvgPlot::SvgPlot(int width, int height) : width_(width), height_(height) {}

void SvgPlot::scatter(const std::string& id, const Matrix& pts, const std::string& color, double radius) {
    if (pts.rows() < 2) throw UsageError("svg: need at least two coordinates to plot");
    layers_.push_back({id, pts.topRows(2), color, radius, false});
}

void SvgPlot::polyline(const std::string& id, const Matrix& pts, const std::string& color, double width) {
    if (pts.rows() < 2) throw UsageError("svg: need at least two coordinates to plot");
    layers_.push_back({id, pts.topRows(2), color, width, true});
}

std::string SvgPlot::render() const {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& l : layers_) {
        if (l.pts.cols() == 0) continue;
        x0 = std::min(x0, l.pts.row(0).minCoeff());
        x1 = std::max(x1, l.pts.row(0).maxCoeff());
        y0 = std::min(y0, l.pts.row(1).minCoeff());
        y1 = std::max(y1, l.pts.row(1).maxCoeff());
    }
    if (!(x1 > x0)) { x0 -= 1; x1 += 1; }
    if (!(y1 > y0)) { y0 -= 1; y1 += 1; }
    // same scale on both axes so the geometry is not distorted
    const double margin = 20.0;
    const double scale = std::min((width_ - 2 * margin) / (x1 - x0), (height_ - 2 * margin) / (y1 - y0));
    auto px = [&](double x) { return margin + (x - x0) * scale; };
    auto py = [&](double y) { return height_ - margin - (y - y0) * scale; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_ << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title_.empty()) os << "<text x=\"" << margin << "\" y=\"14\" font-size=\"12\">" << escape(title_) << "</text>\n";
    for (const auto& l : layers_) {
        os << "<g id=\"" << escape(l.id) << "\">\n";
        if (l.line) {
            os << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"" << num(l.size) << "\" points=\"";
            for (Eigen::Index j = 0; j < l.pts.cols(); ++j) {
                if (j) os << ' ';
                os << num(px(l.pts(0, j))) << ',' << num(py(l.pts(1, j)));
            }
            os << "\"/>\n";
        } else {
            for (Eigen::Index j = 0; j < l.pts.cols(); ++j) {
                os << "<circle cx=\"" << num(px(l.pts(0, j))) << "\" cy=\"" << num(py(l.pts(1, j))) << "\" r=\""
                   << num(l.size) << "\" fill=\"" << l.color << "\"/>\n";
            }
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void SvgPlot::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << render();
}

std::string heatmap_svg(const Matrix& m, int cell) {
    std::ostringstream os;
    const Eigen::Index rows = m.rows(), cols = m.cols();
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * cell << "\" height=\"" << rows * cell
       << "\">\n<g id=\"heatmap\">\n";
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double v = std::clamp(m(i, j), 0.0, 1.0);
            const int r = 255;
            const int gb = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            os << "<rect x=\"" << j * cell << "\" y=\"" << i * cell << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"rgb(" << r << ',' << gb << ',' << gb << ")\"/>\n";
        }
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

}  // namespace flatnet
