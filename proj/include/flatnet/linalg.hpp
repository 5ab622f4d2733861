#pragma once

// Dense linear-algebra helpers shared by every other module.
//
// Storage convention: Matrix is Eigen's default column-major layout and a
// point cloud stores one sample per column (D x N). File formats convert
// explicitly (see datasets.hpp and network.hpp).

#include <Eigen/Dense>

#include <functional>
#include <string>

#include "flatnet/error.hpp"

namespace flatnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Symmetric 3-tensor V in R^{D x d x d}: V(a, b) = sum_jk v_jk a_j b_k for
// intrinsic coordinate vectors a, b. Only slices with j <= k are stored; the
// mirrored slice is returned on read so symmetry holds exactly.
class SymTensor3 {
public:
    SymTensor3() = default;
    SymTensor3(int ambient_dim, int intrinsic_dim);

    int ambient_dim() const { return static_cast<int>(slices_.rows()); }
    int intrinsic_dim() const { return intrinsic_dim_; }
    static int packed_size(int d) { return d * (d + 1) / 2; }

    // Column index of slice (j, k) in packed order (0,0),(0,1),...,(0,d-1),(1,1),...
    static int packed_index(int j, int k, int d);

    Eigen::Ref<const Vector> slice(int j, int k) const;
    void set_slice(int j, int k, const Vector& v);

    // Packed storage, D x d(d+1)/2.
    const Matrix& packed() const { return slices_; }
    Matrix& packed() { return slices_; }

    // V(c, c) for intrinsic coordinates c (length d).
    Vector apply(const Vector& c) const;

    bool is_zero() const { return slices_.size() == 0 || slices_.isZero(0.0); }

private:
    int intrinsic_dim_ = 0;
    Matrix slices_;
};

// Q with orthonormal columns spanning span(M); R has a positive diagonal so
// an already orthonormal input is returned unchanged (up to rounding).
Matrix qr_orthonormalize(const Matrix& m);

struct LeastSquaresResult {
    Matrix solution;
    int rank = 0;
    bool full_rank = false;
};

// argmin_M || diag(sqrt(w)) (A M - C) ||_F. Column-pivoted QR; falls back to
// the SVD minimum-norm solution when the weighted system is rank deficient.
LeastSquaresResult weighted_least_squares(const Matrix& a, const Matrix& c, const Vector& w);

struct EigenPairs {
    Vector values;   // descending
    Matrix vectors;  // D x k, orthonormal columns
};

EigenPairs top_eigvectors(const Matrix& s, int k);

struct CholeskyResult {
    Matrix lower;
    double jitter = 0.0;
};

// L L^T = S + j I for the smallest j in {0, jitter0, 10 jitter0, ...}; gives up
// after 8 escalations.
CholeskyResult cholesky_jitter(const Matrix& s, double jitter0);

struct Bracket {
    double lo;
    double hi;
};

// Safeguarded secant: returns t in [lo, hi] with |g(t) - target| <= tol.
// Throws NumericalError if g(lo), g(hi) do not straddle target or after
// max_iters iterations without convergence.
double scalar_root_find(const std::function<double(double)>& g, double target, Bracket bracket,
                        double tol, int max_iters = 200);

}  // namespace flatnet
