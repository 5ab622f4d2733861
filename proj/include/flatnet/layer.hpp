#pragma once

#include "flatnet/local_model.hpp"
#include "flatnet/pou.hpp"

namespace flatnet {

struct InvertOptions {
    double tol = 1e-13;
    int max_iters = 200;
};

// One flattening layer: forward map
//   f(x) = P_T x + P_N (psi(x) xc + (1 - psi(x)) x)
// and its reconstruction
//   g(z) = z + psi~(z) (P_N (x0 - xc) + V(U^T (z - x0), U^T (z - x0)))
// where psi~(f(x)) = psi(x). P_T = U U^T, P_N = I - P_T.
class FlatLayer {
public:
    FlatLayer() = default;
    // Throws UsageError unless psi.alpha < 1 and psi.x0 == model.x0.
    FlatLayer(LocalQuadraticModel model, PartitionOfUnity psi, InvertOptions invert = {});

    const LocalQuadraticModel& model() const { return model_; }
    const PartitionOfUnity& psi() const { return psi_; }
    const InvertOptions& invert_options() const { return invert_; }
    int ambient_dim() const { return model_.ambient_dim(); }

private:
    LocalQuadraticModel model_;
    PartitionOfUnity psi_;
    InvertOptions invert_;
};

Vector flatten_forward(const FlatLayer& layer, const Vector& x);

// The same map with psi(x) replaced by a fixed weight s.
Vector flatten_with_weight(const LocalQuadraticModel& model, const Vector& x, double s);

// Solves s = alpha exp(-lambda |x(s) - x0|^2) with
// x(s) = P_T z + P_N xc + P_N (z - xc) / (1 - s) for s in [0, min(alpha, 1 - 1e-9)].
double pou_invert(const FlatLayer& layer, const Vector& z);

Vector reconstruct_backward(const FlatLayer& layer, const Vector& z);

// Column-parallel versions.
Matrix flatten_forward(const FlatLayer& layer, const Matrix& x);
Matrix reconstruct_backward(const FlatLayer& layer, const Matrix& z);

}  // namespace flatnet
