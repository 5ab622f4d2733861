#pragma once

// OpenMP kernels for the data-parallel inner loops. Reductions are computed
// per fixed-size block of samples and combined in block order, so results do
// not depend on the thread count. Serial reference versions live in
// tests/reference and are used by the unit tests and the benchmark.

#include <functional>
#include <vector>

#include "flatnet/linalg.hpp"

namespace flatnet::kernels {

inline constexpr Eigen::Index kBlock = 128;

// Packed quadratic design: row i holds c_ij c_ik for j <= k, off-diagonal
// entries doubled, so that (design * Vp^T)_i = V(c_i, c_i). coeffs is d x N.
Matrix quadratic_design(const Matrix& coeffs);

// (1/N) sum_i w_i |V(c_i, c_i) - (r_i - U c_i)|^2 with c_i = U^T r_i.
// r is D x N (samples relative to the base point), v_packed is D x d(d+1)/2.
double quadratic_loss(const Matrix& u, const Matrix& v_packed, const Matrix& r, const Vector& w);

// Euclidean gradient of quadratic_loss with respect to U (V held fixed in
// intrinsic coordinates), D x d.
Matrix quadratic_loss_gradient(const Matrix& u, const Matrix& v_packed, const Matrix& r, const Vector& w);

// Squared distances between every pair of columns, N x N.
Matrix pairwise_sq_dists(const Matrix& x);

// Indices of the k nearest other columns for every column, sorted by
// distance, plus the matching distances. Ties break toward the lower index.
struct Neighbors {
    std::vector<std::vector<int>> index;
    std::vector<std::vector<double>> dist;
};
Neighbors knn(const Matrix& x, int k);

// For every column, the indices of columns within distance radius (itself included).
std::vector<std::vector<int>> ball_neighbors(const Matrix& x, double radius);

// out.col(i) = fn(in.col(i)), columns processed in parallel.
Matrix map_columns(const Matrix& in, const std::function<Vector(const Vector&)>& fn);

}  // namespace flatnet::kernels
