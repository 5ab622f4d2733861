#pragma once

// Single-threaded, loop-by-loop versions of the parallel kernels. They are
// deliberately naive and serve as oracles for the tests and as the baseline
// in the benchmark.

#include <vector>

#include "flatnet/layer.hpp"
#include "flatnet/linalg.hpp"
#include "flatnet/network.hpp"
#include "flatnet/pou.hpp"

namespace flatnet::reference {

// (1/N) sum_i psi(x_i)^2 |V(c_i, c_i) - (I - U U^T)(x_i - x0)|^2, c_i = U^T (x_i - x0).
double recon_loss(const Matrix& U, const SymTensor3& V, const Matrix& X, const Vector& x0,
                  const PartitionOfUnity& psi);

// Same quantity in the packed kernel interface (r = X - x0, w = psi^2).
double quadratic_loss(const Matrix& u, const Matrix& v_packed, const Matrix& r, const Vector& w);
Matrix quadratic_loss_gradient(const Matrix& u, const Matrix& v_packed, const Matrix& r, const Vector& w);

Matrix pairwise_sq_dists(const Matrix& x);

// Full stable sort per point, ties toward the lower index.
struct Neighbors {
    std::vector<std::vector<int>> index;
    std::vector<std::vector<double>> dist;
};
Neighbors knn(const Matrix& x, int k);
std::vector<std::vector<int>> ball_neighbors(const Matrix& x, double radius);

Matrix flatten(const FlatNetModel& model, const Matrix& x);
Matrix reconstruct(const FlatNetModel& model, const Matrix& z);

// Residuals from a full eigendecomposition of each ball's scatter matrix.
double flatness_proxy(const Matrix& x, double eta, int d);

}  // namespace flatnet::reference
