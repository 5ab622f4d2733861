#include "flatnet/linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace flatnet {

SymTensor3::SymTensor3(int ambient_dim, int intrinsic_dim)
    : intrinsic_dim_(intrinsic_dim), slices_(Matrix::Zero(ambient_dim, packed_size(intrinsic_dim))) {}

int SymTensor3::packed_index(int j, int k, int d) {
    if (j > k) std::swap(j, k);
    // rows 0..j-1 contribute d, d-1, ..., d-j+1 entries
    return j * d - j * (j - 1) / 2 + (k - j);
}

Eigen::Ref<const Vector> SymTensor3::slice(int j, int k) const {
    return slices_.col(packed_index(j, k, intrinsic_dim_));
}

void SymTensor3::set_slice(int j, int k, const Vector& v) {
    slices_.col(packed_index(j, k, intrinsic_dim_)) = v;
}

Vector SymTensor3::apply(const Vector& c) const {
    const int d = intrinsic_dim_;
    Vector out = Vector::Zero(slices_.rows());
    int col = 0;
    for (int j = 0; j < d; ++j) {
        out.noalias() += (c[j] * c[j]) * slices_.col(col++);
        for (int k = j + 1; k < d; ++k) out.noalias() += (2.0 * c[j] * c[k]) * slices_.col(col++);
    }
    return out;
}

Matrix qr_orthonormalize(const Matrix& m) {
    const Eigen::Index rows = m.rows();
    const Eigen::Index cols = m.cols();
    if (cols > rows) {
        throw NumericalError("qr_orthonormalize: more columns than rows");
    }
    Eigen::HouseholderQR<Matrix> qr(m);
    const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    const double scale = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    for (Eigen::Index j = 0; j < cols; ++j) {
        // |R_jj| is the norm of column j after removing the earlier columns.
        if (!(std::abs(r(j, j)) > 1e-13 * scale * std::sqrt(static_cast<double>(rows)))) {
            std::ostringstream os;
            os << "qr_orthonormalize: column " << j << " is linearly dependent on the previous ones";
            throw NumericalError(os.str());
        }
    }
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

LeastSquaresResult weighted_least_squares(const Matrix& a, const Matrix& c, const Vector& w) {
    if (a.rows() != c.rows() || a.rows() != w.size()) {
        throw UsageError("weighted_least_squares: row count mismatch");
    }
    if (!(w.maxCoeff() > 0.0)) {
        throw UsageError("weighted_least_squares: all weights are zero");
    }
    const Vector sw = w.cwiseMax(0.0).cwiseSqrt();
    const Matrix wa = sw.asDiagonal() * a;
    const Matrix wc = sw.asDiagonal() * c;

    LeastSquaresResult out;
    Eigen::ColPivHouseholderQR<Matrix> qr(wa);
    qr.setThreshold(1e-12);
    out.rank = static_cast<int>(qr.rank());
    out.full_rank = out.rank == a.cols();
    if (out.full_rank) {
        out.solution = qr.solve(wc);
    } else {
        Eigen::BDCSVD<Matrix> svd(wa, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-12);
        out.solution = svd.solve(wc);
    }
    return out;
}

EigenPairs top_eigvectors(const Matrix& s, int k) {
    if (s.rows() != s.cols()) throw UsageError("top_eigvectors: matrix is not square");
    if (k < 1 || k > s.rows()) throw UsageError("top_eigvectors: k out of range");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw NumericalError("top_eigvectors: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    if (es.info() != Eigen::Success) throw NumericalError("top_eigvectors: eigensolver failed");
    const Eigen::Index n = s.rows();
    EigenPairs out;
    out.values.resize(k);
    out.vectors.resize(n, k);
    // Eigen returns ascending order.
    for (int i = 0; i < k; ++i) {
        out.values[i] = es.eigenvalues()[n - 1 - i];
        out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return out;
}

CholeskyResult cholesky_jitter(const Matrix& s, double jitter0) {
    if (s.rows() != s.cols()) throw UsageError("cholesky_jitter: matrix is not square");
    const Eigen::Index n = s.rows();
    double jitter = 0.0;
    for (int attempt = 0; attempt <= 8; ++attempt) {
        if (attempt == 1) jitter = jitter0;
        if (attempt > 1) jitter *= 10.0;
        Matrix shifted = s;
        shifted.diagonal().array() += jitter;
        Eigen::LLT<Matrix> llt(shifted);
        if (llt.info() == Eigen::Success) {
            Matrix lower = llt.matrixL();
            if (lower.allFinite()) return {std::move(lower), jitter};
        }
        if (!(jitter0 > 0.0)) break;
    }
    std::ostringstream os;
    os << "cholesky_jitter: factorization of " << n << "x" << n
       << " matrix failed after 8 jitter escalations (last jitter " << jitter << ")";
    throw NumericalError(os.str());
}

double scalar_root_find(const std::function<double(double)>& g, double target, Bracket bracket,
                        double tol, int max_iters) {
    double a = bracket.lo;
    double b = bracket.hi;
    double fa = g(a) - target;
    double fb = g(b) - target;
    if (std::abs(fa) <= tol) return a;
    if (std::abs(fb) <= tol) return b;
    if (!(fa * fb < 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "scalar_root_find: target " << target << " not bracketed, g(lo)=" << fa + target
           << " g(hi)=" << fb + target;
        throw NumericalError(os.str());
    }

    double x0 = a, f0 = fa;
    double x1 = b, f1 = fb;
    double width_two_ago = std::abs(b - a) * 2.0;
    double width_prev = std::abs(b - a);
    double last = b;
    for (int iter = 0; iter < max_iters; ++iter) {
        double c = 0.5 * (a + b);
        const bool stalled = std::abs(b - a) > 0.5 * width_two_ago;
        if (f1 != f0 && !stalled) {
            const double s = x1 - f1 * (x1 - x0) / (f1 - f0);
            if (s > std::min(a, b) && s < std::max(a, b)) c = s;
        }
        if (c == a || c == b) break;  // bracket exhausted at machine resolution
        const double fc = g(c) - target;
        last = c;
        if (std::abs(fc) <= tol) return c;
        if ((fc < 0.0) == (fa < 0.0)) {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
        x0 = x1;
        f0 = f1;
        x1 = c;
        f1 = fc;
        width_two_ago = width_prev;
        width_prev = std::abs(b - a);
    }
    std::ostringstream os;
    os.precision(17);
    os << "scalar_root_find: no convergence, last iterate " << last;
    throw NumericalError(os.str());
}

}  // namespace flatnet
