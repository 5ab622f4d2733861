#pragma once

#include "flatnet/linalg.hpp"

namespace flatnet {

// psi(x) = alpha * exp(-lambda |x - x0|^2). Never thresholded: every point
// keeps a strictly positive weight.
struct PartitionOfUnity {
    Vector x0;
    double lambda = 1.0;
    double alpha = 1.0;

    PartitionOfUnity() = default;
    PartitionOfUnity(Vector base, double lambda_, double alpha_ = 1.0);

    double operator()(const Vector& x) const;
};

double pou_eval(const PartitionOfUnity& p, const Vector& x);

// Distance at which psi decays to eps: sqrt(log(alpha / eps) / lambda).
double pou_radius(const PartitionOfUnity& p, double eps);

// Inverse of pou_radius for alpha = 1: the lambda whose psi equals eps at r.
double lambda_for_radius(double radius, double eps = 0.5);

// psi evaluated at every column of x.
Vector pou_weights(const PartitionOfUnity& p, const Matrix& x);

// sum_i x_i psi(x_i) / sum_i psi(x_i).
Vector local_mean(const PartitionOfUnity& p, const Matrix& x);

}  // namespace flatnet
