#include "flatnet/datasets.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <omp.h>

#include "flatnet/rng.hpp"

namespace flatnet {

void PointCloud::validate() const {
    if (X.cols() < 1 || X.rows() < 1) throw DataError("point cloud is empty");
    if (!X.allFinite()) throw DataError("point cloud has non-finite entries");
    if (coords) {
        if (coords->cols() != X.cols()) {
            throw DataError("intrinsic coordinates have " + std::to_string(coords->cols()) +
                            " columns but the cloud has " + std::to_string(X.cols()));
        }
        if (!coords->allFinite()) throw DataError("intrinsic coordinates have non-finite entries");
    }
}

Matrix gp_correlation(const Matrix& coords) {
    const Eigen::Index n = coords.cols();
    Matrix k(n, n);
    for (Eigen::Index q = 0; q < n; ++q) {
        k(q, q) = 1.0;
        for (Eigen::Index p = q + 1; p < n; ++p) {
            const double rho = (coords.col(p) - coords.col(q)).squaredNorm();
            k(p, q) = k(q, p) = std::exp(-0.5 * rho);
        }
    }
    return k;
}

GpManifold gen_gp_manifold(const GpManifoldParams& params, std::uint64_t seed) {
    const int d = params.intrinsic_dim;
    const int D = params.ambient_dim;
    const int n = params.count;
    if (d < 1 || d >= D) throw UsageError("gen_gp_manifold: need 1 <= d < D");
    if (n < 2) throw UsageError("gen_gp_manifold: need N >= 2");
    Vector scales = params.scales.size() == 0 ? Vector::Ones(D) : params.scales;
    if (scales.size() != D) throw UsageError("gen_gp_manifold: scale vector length must equal D");
    if ((scales.array() <= 0.0).any()) throw UsageError("gen_gp_manifold: scales must be positive");

    Rng coord_rng(seed, 0);
    Matrix coords(d, n);
    for (int p = 0; p < n; ++p)
        for (int j = 0; j < d; ++j) coords(j, p) = coord_rng.uniform();

    // Sigma_i = (L_i / D) K, so one factorization of K serves every row; the
    // jitter escalation is relative (1e-10 trace / N) and scales the same way.
    const Matrix k = gp_correlation(coords);
    const CholeskyResult chol = cholesky_jitter(k, 1e-10 * k.trace() / n);

    Matrix x(D, n);
    for (int i = 0; i < D; ++i) {
        Rng row_rng(seed, static_cast<std::uint64_t>(i) + 1);
        Vector xi(n);
        for (int p = 0; p < n; ++p) xi[p] = row_rng.normal();
        x.row(i) = (std::sqrt(scales[i] / D) * (chol.lower * xi)).transpose();
    }

    GpManifold out;
    out.cloud.X = std::move(x);
    out.cloud.coords = std::move(coords);
    out.cloud.seed = seed;
    out.jitter = chol.jitter * scales.maxCoeff() / D;
    return out;
}

PointCloud gen_sine(const SineParams& params, std::uint64_t seed) {
    if (params.count < 2) throw UsageError("gen_sine: need N >= 2");
    if (!(params.frequency > 0.0)) throw UsageError("gen_sine: frequency must be positive");
    Rng rng(seed);
    const double period = 2.0 * M_PI / params.frequency;
    PointCloud pc;
    pc.X.resize(2, params.count);
    pc.coords = Matrix(1, params.count);
    for (int p = 0; p < params.count; ++p) {
        const double t = rng.uniform(0.0, period);
        const double noise = params.noise_sigma * rng.normal();
        pc.X(0, p) = t;
        pc.X(1, p) = params.amplitude * std::sin(params.frequency * t) + noise;
        (*pc.coords)(0, p) = t;
    }
    pc.seed = seed;
    return pc;
}

PointCloud gen_circle(const CircleParams& params, std::uint64_t seed) {
    if (params.count < 1) throw UsageError("gen_circle: need N >= 1");
    if (!(params.arc_fraction > 0.0 && params.arc_fraction <= 1.0)) {
        throw UsageError("gen_circle: arc fraction must lie in (0, 1]");
    }
    Rng rng(seed);
    PointCloud pc;
    pc.X.resize(2, params.count);
    pc.coords = Matrix(1, params.count);
    for (int p = 0; p < params.count; ++p) {
        const double angle = rng.uniform(0.0, 2.0 * M_PI * params.arc_fraction);
        const double r = params.radius + params.noise_sigma * rng.normal();
        pc.X(0, p) = r * std::cos(angle);
        pc.X(1, p) = r * std::sin(angle);
        (*pc.coords)(0, p) = angle;
    }
    pc.seed = seed;
    return pc;
}

PointCloud gen_swiss_roll(int count, bool augmented, std::uint64_t seed) {
    if (count < 2) throw UsageError("gen_swiss_roll: need N >= 2");
    Rng rng(seed);
    PointCloud pc;
    pc.X.resize(augmented ? 4 : 3, count);
    pc.coords = Matrix(2, count);
    for (int p = 0; p < count; ++p) {
        const double t = 1.5 * M_PI + 3.0 * M_PI * rng.uniform();
        const double h = 21.0 * rng.uniform();
        const double x1 = t * std::cos(t);
        const double x3 = t * std::sin(t);
        pc.X(0, p) = x1;
        pc.X(1, p) = h;
        pc.X(2, p) = x3;
        if (augmented) pc.X(3, p) = x1 * x1 + x3 * x3;
        (*pc.coords)(0, p) = t;
        (*pc.coords)(1, p) = h;
    }
    pc.seed = seed;
    return pc;
}

std::string format_real(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::filesystem::path coords_path_for(const std::filesystem::path& path) {
    std::filesystem::path out = path;
    out.replace_filename(path.stem().string() + ".coords" + path.extension().string());
    return out;
}

void save_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << "# D=" << m.rows() << " N=" << m.cols() << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << format_real(m(i, j));
        }
        os << '\n';
    }
    if (!os) throw DataError("write to " + path.string() + " failed");
}

namespace {

[[noreturn]] void csv_fail(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

Matrix load_matrix_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) csv_fail(path, 1, "empty file");
    long rows = -1, cols = -1;
    if (std::sscanf(line.c_str(), "# D=%ld N=%ld", &rows, &cols) != 2 || rows < 1 || cols < 1) {
        csv_fail(path, 1, "expected header '# D=<int> N=<int>'");
    }
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        const std::size_t lineno = static_cast<std::size_t>(i) + 2;
        if (!std::getline(is, line)) csv_fail(path, lineno, "missing row (header promised D=" + std::to_string(rows) + ")");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const char* p = line.data();
        const char* end = line.data() + line.size();
        long j = 0;
        while (true) {
            if (j >= cols) csv_fail(path, lineno, "more than N=" + std::to_string(cols) + " values");
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc() || (next != end && *next != ',')) {
                csv_fail(path, lineno, "non-numeric cell at column " + std::to_string(j + 1));
            }
            if (!std::isfinite(v)) csv_fail(path, lineno, "non-finite cell at column " + std::to_string(j + 1));
            m(i, j++) = v;
            if (next == end) break;
            p = next + 1;
        }
        if (j != cols) {
            csv_fail(path, lineno, "expected " + std::to_string(cols) + " values, got " + std::to_string(j));
        }
    }
    while (std::getline(is, line)) {
        if (!line.empty() && line != "\r") csv_fail(path, static_cast<std::size_t>(rows) + 2, "unexpected trailing data");
    }
    return m;
}

void save_csv(const PointCloud& pc, const std::filesystem::path& path) {
    pc.validate();
    save_matrix_csv(pc.X, path);
    if (pc.coords) save_matrix_csv(*pc.coords, coords_path_for(path));
}

PointCloud load_csv(const std::filesystem::path& path) {
    PointCloud pc;
    pc.X = load_matrix_csv(path);
    const auto cpath = coords_path_for(path);
    if (std::filesystem::exists(cpath)) pc.coords = load_matrix_csv(cpath);
    pc.validate();
    return pc;
}

double total_variance(const Matrix& x) {
    if (x.cols() == 0) return 0.0;
    const Vector mean = x.rowwise().mean();
    return (x.colwise() - mean).colwise().squaredNorm().mean();
}

double diameter(const Matrix& x) {
    const Eigen::Index n = x.cols();
    std::vector<double> best(static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < n; ++i) {
        double m = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) m = std::max(m, (x.col(i) - x.col(j)).squaredNorm());
        best[static_cast<std::size_t>(i)] = m;
    }
    double m = 0.0;
    for (double b : best) m = std::max(m, b);
    return std::sqrt(m);
}

}  // namespace flatnet
