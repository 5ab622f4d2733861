#pragma once

// Small helpers shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "flatnet/linalg.hpp"
#include "flatnet/rng.hpp"

namespace flatnet::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

// Classical Gram-Schmidt, written out independently of the library.
inline Matrix gram_schmidt(const Matrix& m) {
    Matrix q = m;
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        for (Eigen::Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(m.col(j)) * q.col(k);
        q.col(j) /= q.col(j).norm();
    }
    return q;
}

inline Matrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    return gram_schmidt(random_matrix(rows, cols, rng));
}

// Random proper rotation of R^D.
inline Matrix random_rotation(Eigen::Index dim, Rng& rng) {
    Matrix q = random_orthonormal(dim, dim, rng);
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
}

// Largest principal angle between the column spans of two orthonormal bases.
// (sine form, accurate for small angles)
inline double principal_angle(const Matrix& a, const Matrix& b) {
    const Matrix resid = a - b * (b.transpose() * a);
    Eigen::JacobiSVD<Matrix> svd(resid);
    return std::asin(std::min(1.0, svd.singularValues()[0]));
}

// n points uniform on a d-dimensional affine patch in R^D.
inline Matrix plane_data(int D, int d, int n, Rng& rng, Matrix* basis = nullptr, Vector* offset = nullptr) {
    const Matrix u = random_orthonormal(D, d, rng);
    const Vector o = random_matrix(D, 1, rng);
    Matrix c(d, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i) c(i, j) = rng.uniform(-1.0, 1.0);
    if (basis) *basis = u;
    if (offset) *offset = o;
    return (u * c).colwise() + o;
}

// Distance from p to the graph y = A sin(w x) for x in [0, 2 pi / w], by a
// dense grid over x followed by golden-section refinement.
inline double distance_to_sine(const Vector& p, double amplitude, double frequency) {
    const double period = 2.0 * M_PI / frequency;
    auto dist2 = [&](double t) {
        const double dx = p[0] - t, dy = p[1] - amplitude * std::sin(frequency * t);
        return dx * dx + dy * dy;
    };
    const int grid = 4000;
    int best = 0;
    for (int i = 1; i <= grid; ++i)
        if (dist2(period * i / grid) < dist2(period * best / grid)) best = i;
    double lo = period * std::max(0, best - 1) / grid, hi = period * std::min(grid, best + 1) / grid;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
        const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
        if (dist2(a) < dist2(b)) hi = b;
        else lo = a;
    }
    return std::sqrt(dist2(0.5 * (lo + hi)));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("flatnet_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::FILE* f = std::fopen(p.string().c_str(), "rb");
    if (!f) return {};
    std::string s;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
    std::fclose(f);
    return s;
}

}  // namespace flatnet::testing
