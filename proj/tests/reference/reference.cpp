#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flatnet::reference {

double recon_loss(const Matrix& U, const SymTensor3& V, const Matrix& X, const Vector& x0,
                  const PartitionOfUnity& psi) {
    const Eigen::Index D = U.rows(), d = U.cols(), n = X.cols();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> r(static_cast<std::size_t>(D)), c(static_cast<std::size_t>(d), 0.0);
        for (Eigen::Index a = 0; a < D; ++a) r[a] = X(a, i) - x0[a];
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index a = 0; a < D; ++a) c[j] += U(a, j) * r[a];
        double sq = 0.0;
        for (Eigen::Index a = 0; a < D; ++a) {
            double tangential = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) tangential += U(a, j) * c[j];
            double quad = 0.0;
            for (Eigen::Index j = 0; j < d; ++j)
                for (Eigen::Index k = 0; k < d; ++k)
                    quad += V.slice(static_cast<int>(j), static_cast<int>(k))[a] * c[j] * c[k];
            const double e = quad - (r[a] - tangential);
            sq += e * e;
        }
        const double p = psi(X.col(i));
        total += p * p * sq;
    }
    return total / static_cast<double>(n);
}

namespace {

// V(c, c) from packed storage with explicit slice loops.
double packed_quad(const Matrix& vp, Eigen::Index a, const std::vector<double>& c) {
    const int d = static_cast<int>(c.size());
    double q = 0.0;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            const int col = SymTensor3::packed_index(std::min(j, k), std::max(j, k), d);
            q += vp(a, col) * c[j] * c[k];
        }
    return q;
}

}  // namespace

double quadratic_loss(const Matrix& u, const Matrix& v_packed, const Matrix& r, const Vector& w) {
    const Eigen::Index D = u.rows(), d = u.cols(), n = r.cols();
    if (n == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> c(static_cast<std::size_t>(d), 0.0);
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index a = 0; a < D; ++a) c[j] += u(a, j) * r(a, i);
        double sq = 0.0;
        for (Eigen::Index a = 0; a < D; ++a) {
            double uc = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) uc += u(a, j) * c[j];
            const double e = packed_quad(v_packed, a, c) - r(a, i) + uc;
            sq += e * e;
        }
        total += w[i] * sq;
    }
    return total / static_cast<double>(n);
}

Matrix quadratic_loss_gradient(const Matrix& u, const Matrix& v_packed, const Matrix& r, const Vector& w) {
    const Eigen::Index D = u.rows(), d = u.cols(), n = r.cols();
    Matrix grad = Matrix::Zero(D, d);
    if (n == 0) return grad;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> c(static_cast<std::size_t>(d), 0.0);
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index a = 0; a < D; ++a) c[j] += u(a, j) * r(a, i);
        std::vector<double> e(static_cast<std::size_t>(D));
        for (Eigen::Index a = 0; a < D; ++a) {
            double uc = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) uc += u(a, j) * c[j];
            e[a] = packed_quad(v_packed, a, c) - r(a, i) + uc;
        }
        // de/dc_j = 2 sum_k v_jk c_k + u_j; de/du_aj also has a direct c_j e_a term
        for (Eigen::Index j = 0; j < d; ++j) {
            double s = 0.0;
            for (Eigen::Index b = 0; b < D; ++b) {
                double dv = u(b, j);
                for (Eigen::Index k = 0; k < d; ++k) {
                    const int col = SymTensor3::packed_index(static_cast<int>(std::min(j, k)),
                                                             static_cast<int>(std::max(j, k)), static_cast<int>(d));
                    dv += 2.0 * v_packed(b, col) * c[k];
                }
                s += e[b] * dv;
            }
            for (Eigen::Index a = 0; a < D; ++a) grad(a, j) += w[i] * (r(a, i) * s + c[j] * e[a]);
        }
    }
    return grad * (2.0 / static_cast<double>(n));
}

Matrix pairwise_sq_dists(const Matrix& x) {
    const Eigen::Index n = x.cols(), D = x.rows();
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            double s = 0.0;
            for (Eigen::Index a = 0; a < D; ++a) s += (x(a, i) - x(a, j)) * (x(a, i) - x(a, j));
            out(i, j) = s;
        }
    return out;
}

Neighbors knn(const Matrix& x, int k) {
    const int n = static_cast<int>(x.cols());
    const Matrix d2 = pairwise_sq_dists(x);
    Neighbors out;
    for (int i = 0; i < n; ++i) {
        std::vector<int> order;
        for (int j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d2(i, a) < d2(i, b); });
        order.resize(static_cast<std::size_t>(k));
        std::vector<double> dist;
        for (int j : order) dist.push_back(std::sqrt(d2(i, j)));
        out.index.push_back(order);
        out.dist.push_back(dist);
    }
    return out;
}

std::vector<std::vector<int>> ball_neighbors(const Matrix& x, double radius) {
    const Matrix d2 = pairwise_sq_dists(x);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.cols(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            if (d2(i, j) <= radius * radius) out[i].push_back(static_cast<int>(j));
    return out;
}

Matrix flatten(const FlatNetModel& model, const Matrix& x) {
    Matrix z = x;
    for (const auto& layer : model.layers)
        for (Eigen::Index i = 0; i < z.cols(); ++i) z.col(i) = flatten_forward(layer, Vector(z.col(i)));
    return z;
}

Matrix reconstruct(const FlatNetModel& model, const Matrix& z) {
    Matrix x = z;
    for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it)
        for (Eigen::Index i = 0; i < x.cols(); ++i) x.col(i) = reconstruct_backward(*it, Vector(x.col(i)));
    return x;
}

double flatness_proxy(const Matrix& x, double eta, int d) {
    const auto balls = ball_neighbors(x, eta);
    double total = 0.0;
    for (const auto& nb : balls) {
        const int m = static_cast<int>(nb.size());
        if (m < d + 1) continue;
        Vector mean = Vector::Zero(x.rows());
        for (int j : nb) mean += x.col(j);
        mean /= m;
        Matrix scatter = Matrix::Zero(x.rows(), x.rows());
        for (int j : nb) scatter += (x.col(j) - mean) * (x.col(j) - mean).transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> es(scatter);
        const Vector ev = es.eigenvalues();  // ascending
        double tail = 0.0;
        for (Eigen::Index k = 0; k < ev.size() - d; ++k) tail += std::max(0.0, ev[k]);
        total += std::sqrt(tail / m);
    }
    return total;
}

}  // namespace flatnet::reference
