#include "flatnet/layer.hpp"

#include <cmath>

#include "flatnet/kernels.hpp"

namespace flatnet {

FlatLayer::FlatLayer(LocalQuadraticModel model, PartitionOfUnity psi, InvertOptions invert)
    : model_(std::move(model)), psi_(std::move(psi)), invert_(invert) {
    if (!(psi_.alpha < 1.0)) throw UsageError("FlatLayer: alpha must be strictly below 1");
    if (psi_.x0.size() != model_.x0.size() || psi_.x0 != model_.x0) {
        throw UsageError("FlatLayer: partition of unity must be centred on the model base point");
    }
    if (model_.xc.size() != model_.x0.size() || model_.U.rows() != model_.x0.size() ||
        model_.V.ambient_dim() != model_.U.rows() || model_.V.intrinsic_dim() != model_.U.cols()) {
        throw UsageError("FlatLayer: inconsistent model dimensions");
    }
}

Vector flatten_with_weight(const LocalQuadraticModel& model, const Vector& x, double s) {
    const Vector blend = s * model.xc + (1.0 - s) * x;
    // P_T x + P_N blend = blend + P_T (x - blend)
    return blend + model.U * (model.U.transpose() * (x - blend));
}

Vector flatten_forward(const FlatLayer& layer, const Vector& x) {
    return flatten_with_weight(layer.model(), x, pou_eval(layer.psi(), x));
}

double pou_invert(const FlatLayer& layer, const Vector& z) {
    const LocalQuadraticModel& m = layer.model();
    const PartitionOfUnity& psi = layer.psi();
    const Vector tz = m.U.transpose() * (z - m.x0);
    const double tangential = tz.squaredNorm();
    const Vector dc = m.xc - m.x0;
    const Vector base = dc - m.U * (m.U.transpose() * dc);  // P_N (xc - x0)
    const Vector ez = z - m.xc;
    const Vector normal = ez - m.U * (m.U.transpose() * ez);  // P_N (z - xc)

    auto residual = [&](double s) {
        const double normal_sq = (base + normal / (1.0 - s)).squaredNorm();
        return s - psi.alpha * std::exp(-psi.lambda * (tangential + normal_sq));
    };
    const double hi = std::min(psi.alpha, 1.0 - 1e-9);
    const InvertOptions& opt = layer.invert_options();
    return scalar_root_find(residual, 0.0, {0.0, hi}, opt.tol, opt.max_iters);
}

Vector reconstruct_backward(const FlatLayer& layer, const Vector& z) {
    const LocalQuadraticModel& m = layer.model();
    const double s = pou_invert(layer, z);
    const Vector offset = m.x0 - m.xc;
    const Vector c = m.U.transpose() * (z - m.x0);
    return z + s * (offset - m.U * (m.U.transpose() * offset) + m.V.apply(c));
}

Matrix flatten_forward(const FlatLayer& layer, const Matrix& x) {
    return kernels::map_columns(x, [&](const Vector& col) { return flatten_forward(layer, col); });
}

Matrix reconstruct_backward(const FlatLayer& layer, const Matrix& z) {
    return kernels::map_columns(z, [&](const Vector& col) { return reconstruct_backward(layer, col); });
}

}  // namespace flatnet
