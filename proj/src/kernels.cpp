#include "flatnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include <omp.h>

namespace flatnet::kernels {

namespace {

Eigen::Index block_count(Eigen::Index n) { return (n + kBlock - 1) / kBlock; }

}  // namespace

Matrix quadratic_design(const Matrix& coeffs) {
    const Eigen::Index d = coeffs.rows();
    const Eigen::Index n = coeffs.cols();
    Matrix a(n, d * (d + 1) / 2);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index col = 0;
        for (Eigen::Index j = 0; j < d; ++j) {
            a(i, col++) = coeffs(j, i) * coeffs(j, i);
            for (Eigen::Index k = j + 1; k < d; ++k) a(i, col++) = 2.0 * coeffs(j, i) * coeffs(k, i);
        }
    }
    return a;
}

double quadratic_loss(const Matrix& u, const Matrix& v_packed, const Matrix& r, const Vector& w) {
    const Eigen::Index n = r.cols();
    if (n == 0) return 0.0;
    const Eigen::Index blocks = block_count(n);
    std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
#pragma omp parallel for schedule(static)
    for (Eigen::Index b = 0; b < blocks; ++b) {
        const Eigen::Index start = b * kBlock;
        const Eigen::Index len = std::min(kBlock, n - start);
        const auto rb = r.middleCols(start, len);
        const Matrix c = u.transpose() * rb;
        Matrix e = v_packed * quadratic_design(c).transpose();
        e.noalias() -= rb;
        e.noalias() += u * c;
        partial[static_cast<std::size_t>(b)] = e.colwise().squaredNorm().dot(w.segment(start, len).transpose());
    }
    return std::accumulate(partial.begin(), partial.end(), 0.0) / static_cast<double>(n);
}

Matrix quadratic_loss_gradient(const Matrix& u, const Matrix& v_packed, const Matrix& r, const Vector& w) {
    const Eigen::Index n = r.cols();
    const Eigen::Index dim = u.rows();
    const Eigen::Index d = u.cols();
    if (n == 0) return Matrix::Zero(dim, d);
    const Eigen::Index blocks = block_count(n);
    std::vector<Matrix> partial(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static)
    for (Eigen::Index b = 0; b < blocks; ++b) {
        const Eigen::Index start = b * kBlock;
        const Eigen::Index len = std::min(kBlock, n - start);
        const auto rb = r.middleCols(start, len);
        const Matrix c = u.transpose() * rb;
        Matrix e = v_packed * quadratic_design(c).transpose();
        e.noalias() -= rb;
        e.noalias() += u * c;
        e = e * w.segment(start, len).asDiagonal();  // weighted residuals

        // g_i = (Q_i + U)^T e_i where column j of Q_i is 2 sum_k v_jk c_ik.
        const Matrix p = v_packed.transpose() * e;  // (v_jk . e_i)
        Matrix g = u.transpose() * e;
        for (Eigen::Index i = 0; i < len; ++i) {
            Eigen::Index col = 0;
            for (Eigen::Index j = 0; j < d; ++j) {
                g(j, i) += 2.0 * c(j, i) * p(col, i);
                ++col;
                for (Eigen::Index k = j + 1; k < d; ++k, ++col) {
                    g(j, i) += 2.0 * c(k, i) * p(col, i);
                    g(k, i) += 2.0 * c(j, i) * p(col, i);
                }
            }
        }
        partial[static_cast<std::size_t>(b)] = rb * g.transpose() + e * c.transpose();
    }
    Matrix grad = Matrix::Zero(dim, d);
    for (const Matrix& p : partial) grad += p;
    return grad * (2.0 / static_cast<double>(n));
}

Matrix pairwise_sq_dists(const Matrix& x) {
    const Eigen::Index n = x.cols();
    Matrix out(n, n);
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index j = 0; j < n; ++j) {
        out(j, j) = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i != j) out(i, j) = (x.col(i) - x.col(j)).squaredNorm();
        }
    }
    return out;
}

Neighbors knn(const Matrix& x, int k) {
    const int n = static_cast<int>(x.cols());
    if (k < 1 || k >= n) throw UsageError("knn: need 1 <= k < N");
    Neighbors out;
    out.index.resize(static_cast<std::size_t>(n));
    out.dist.resize(static_cast<std::size_t>(n));
#pragma omp parallel
    {
        std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n - 1));
#pragma omp for schedule(dynamic, 16)
        for (int i = 0; i < n; ++i) {
            std::size_t m = 0;
            for (int j = 0; j < n; ++j) {
                if (j != i) cand[m++] = {(x.col(i) - x.col(j)).squaredNorm(), j};
            }
            std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
            auto& idx = out.index[static_cast<std::size_t>(i)];
            auto& dst = out.dist[static_cast<std::size_t>(i)];
            idx.resize(static_cast<std::size_t>(k));
            dst.resize(static_cast<std::size_t>(k));
            for (int t = 0; t < k; ++t) {
                idx[static_cast<std::size_t>(t)] = cand[static_cast<std::size_t>(t)].second;
                dst[static_cast<std::size_t>(t)] = std::sqrt(cand[static_cast<std::size_t>(t)].first);
            }
        }
    }
    return out;
}

std::vector<std::vector<int>> ball_neighbors(const Matrix& x, double radius) {
    const int n = static_cast<int>(x.cols());
    const double r2 = radius * radius;
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
        auto& nb = out[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
            if ((x.col(i) - x.col(j)).squaredNorm() <= r2) nb.push_back(j);
        }
    }
    return out;
}

Matrix map_columns(const Matrix& in, const std::function<Vector(const Vector&)>& fn) {
    const Eigen::Index n = in.cols();
    Matrix out(in.rows(), n);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (Eigen::Index i = 0; i < n; ++i) {
        try {
            Vector y = fn(in.col(i));
            out.col(i) = y;
        } catch (...) {
#pragma omp critical(flatnet_map_columns)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace flatnet::kernels
