#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "flatnet/linalg.hpp"

namespace flatnet {

// A dataset of N samples in R^D stored column-wise (X is D x N). Synthetic
// generators also keep the intrinsic coordinates that produced each sample.
struct PointCloud {
    Matrix X;
    std::optional<Matrix> coords;  // d x N
    std::optional<std::uint64_t> seed;

    int dim() const { return static_cast<int>(X.rows()); }
    int size() const { return static_cast<int>(X.cols()); }

    // Throws DataError when N == 0, entries are non-finite, or coords width != N.
    void validate() const;
};

struct GpManifoldParams {
    int intrinsic_dim = 2;
    int ambient_dim = 10;
    int count = 500;
    Vector scales;  // L_i per ambient coordinate; empty means all ones
};

struct GpManifold {
    PointCloud cloud;
    double jitter = 0.0;  // diagonal shift the Cholesky factorization needed
};

// Random manifold whose ambient coordinates are independent Gaussian processes
// over intrinsic coordinates drawn uniformly from [0,1]^d, with covariance
// (L_i / D) exp(-|c_p - c_q|^2 / 2).
GpManifold gen_gp_manifold(const GpManifoldParams& params, std::uint64_t seed);

// Squared-exponential kernel matrix exp(-|c_p - c_q|^2 / 2) over columns of c.
Matrix gp_correlation(const Matrix& coords);

struct SineParams {
    int count = 50;
    double amplitude = 1.0;
    double frequency = 1.0;
    double noise_sigma = 0.05;
};

// Graph of y = A sin(w x) over one period with Gaussian noise on y.
PointCloud gen_sine(const SineParams& params, std::uint64_t seed);

struct CircleParams {
    int count = 200;
    double radius = 1.0;
    double arc_fraction = 1.0;
    double noise_sigma = 0.0;
};

// Angles uniform on [0, 2 pi arc_fraction), radius perturbed by Gaussian noise.
PointCloud gen_circle(const CircleParams& params, std::uint64_t seed);

// Swiss roll (t cos t, h, t sin t), t in [1.5 pi, 4.5 pi], h in [0, 21]. The
// augmented variant appends x1^2 + x3^2 as a fourth coordinate.
PointCloud gen_swiss_roll(int count, bool augmented, std::uint64_t seed);

// CSV layout: first line "# D=<int> N=<int>", then one line per ambient
// coordinate holding N comma-separated values printed with 17 significant
// digits. Intrinsic coordinates, when present, go to a sibling file.
std::filesystem::path coords_path_for(const std::filesystem::path& path);

void save_csv(const PointCloud& pc, const std::filesystem::path& path);
PointCloud load_csv(const std::filesystem::path& path);

// Plain matrix CSV in the same layout (rows as lines).
void save_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix_csv(const std::filesystem::path& path);

std::string format_real(double value);

// Summary statistics used for scale-relative defaults.
double total_variance(const Matrix& x);
double diameter(const Matrix& x);

}  // namespace flatnet
