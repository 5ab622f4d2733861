#pragma once

// Local quadratic model fitting at a base point: tangent basis U, curvature
// tensor V, local dimension, and partition-of-unity scale.

#include <optional>
#include <string>
#include <vector>

#include "flatnet/linalg.hpp"
#include "flatnet/pou.hpp"

namespace flatnet {

// x0 + U c + V(c, c) is the local quadratic surface; xc is the psi-weighted
// local mean used as the flattening offset. V stores half the second
// fundamental form, so V(c, c) is the whole quadratic correction.
struct LocalQuadraticModel {
    Vector x0;
    Vector xc;
    Matrix U;  // D x d, orthonormal columns
    SymTensor3 V;

    int ambient_dim() const { return static_cast<int>(U.rows()); }
    int intrinsic_dim() const { return static_cast<int>(U.cols()); }
};

struct StiefelOptions {
    int max_iters = 200;
    // Initial step is step0 / m2 where m2 = (1/N) sum psi^2 |x_i - x0|^2,
    // the curvature scale of the loss along the manifold.
    double step0 = 1.0;
    // Stop when |Riemannian gradient|_F <= grad_tol * m2.
    double grad_tol = 1e-8;
};

struct HaltOptions {
    double flat_tol = 1e-6;  // in units of N * diameter (see network.hpp)
    int patience = 20;
    double eta = 0.0;        // flatness-proxy ball radius; 0 means 0.2 * diameter
};

struct Hyperparams {
    int L_max = 300;
    double eps_dim = 0.0;
    double lambda0 = 0.0;
    double eps_pou = 0.0;
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    double alpha_max = 0.5;
    StiefelOptions stiefel;
    HaltOptions halt;

    // Throws UsageError naming the first offending field.
    void validate() const;

    // Scale-relative defaults: eps_dim = 1e-3 var, eps_pou = 1e-4 var, and
    // lambdas whose psi = 1/2 radius is 0.2 diam (lambda0), 0.05 diam
    // (lambda_max), and diam (lambda_min).
    static Hyperparams defaults_for(const Matrix& x);
};

struct LocalFit {
    Matrix U;
    SymTensor3 V;
    double loss = 0.0;
    bool unique_v = true;           // A' had full column rank
    double effective_samples = 0.0;  // Kish size of the psi^2 weights
    int iterations = 0;
    std::vector<double> loss_history;  // one entry per accepted outer step, starting at init

    // Fewer effective samples than quadratic coefficients, or rank-deficient A'.
    bool degenerate() const;
};

// (1/N) sum_i psi(x_i)^2 |V(U U^T (x_i - x0), U U^T (x_i - x0)) - (I - U U^T)(x_i - x0)|^2
double recon_loss(const Matrix& U, const SymTensor3& V, const Matrix& X, const Vector& x0,
                  const PartitionOfUnity& psi);

struct VSolution {
    SymTensor3 V;
    bool unique = true;
    int rank = 0;
};

// Exact minimizer of recon_loss over V for fixed U.
VSolution solve_v(const Matrix& U, const Matrix& X, const Vector& x0, const PartitionOfUnity& psi);

// Top-d eigenvectors of sum_i psi(x_i)^2 (x_i - x0)(x_i - x0)^T.
Matrix weighted_pca_init(const Matrix& X, const Vector& x0, const PartitionOfUnity& psi, int d);

// Alternating minimization: exact V for each U, Riemannian gradient descent
// on the Stiefel manifold for U with QR retraction and backtracking.
LocalFit optimize_u(const Matrix& X, const Vector& x0, const PartitionOfUnity& psi, int d,
                    const StiefelOptions& opts, const std::optional<Matrix>& init = std::nullopt);

// optimize_u with weighted-PCA initialization.
LocalFit recon(int d, const PartitionOfUnity& psi, const Matrix& X, const Vector& x0, const StiefelOptions& opts);

struct DimensionEstimate {
    int d = 0;
    int recon_calls = 0;
    LocalFit fit;
};

// Smallest d >= 1 with recon(d, psi0) <= eps_dim, searched from a warm start.
DimensionEstimate estimate_local_dimension(const Matrix& X, const Vector& x0, const PartitionOfUnity& psi0,
                                           double eps_dim, int d_start, const StiefelOptions& opts);

struct LambdaSelection {
    double lambda = 0.0;
    double ell = 0.0;  // recon(d, psi_lambda) at the chosen lambda
    LocalFit fit;
    bool clamped_low = false;
    bool clamped_high = false;
    int evaluations = 0;
    std::string warning;
};

// Relative tolerance on ell(lambda) = eps_pou used by select_lambda.
inline constexpr double kLambdaRootTol = 0.02;

// Smallest lambda in [lambda_min, lambda_max] with ell(lambda) <= eps_pou;
// ell is non-increasing in lambda.
LambdaSelection select_lambda(const Matrix& X, const Vector& x0, int d, double eps_pou, double lambda_min,
                              double lambda_max, const StiefelOptions& opts);

// psi with alpha = min(alpha_max, sqrt(eps_pou / ell)); alpha_max when ell = 0.
PartitionOfUnity finalize_pou(double lambda, double ell, double eps_pou, double alpha_max, const Vector& x0);

}  // namespace flatnet
