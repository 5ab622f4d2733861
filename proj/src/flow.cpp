#include "flatnet/flow.hpp"

#include <cmath>
#include <string>

#include "flatnet/metrics.hpp"
#include "flatnet/pou.hpp"

namespace flatnet {

void FlowState::validate() const {
    if (!(h >= 0.0 && h <= 1.0)) throw UsageError("flow: step size h must lie in [0, 1]");
    if (!(lambda > 0.0)) throw UsageError("flow: lambda must be positive");
    if (tangent_d < 0) throw UsageError("flow: tangent dimension must be non-negative");
    if (X.cols() == 0) throw DataError("flow: empty point cloud");
}

namespace {

void check_finite(const Matrix& x, int step) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (!x.col(j).allFinite()) {
            throw NumericalError("flow: point " + std::to_string(j) + " became non-finite at step " +
                                 std::to_string(step));
        }
    }
}

}  // namespace

FlowStep flow_step_unnormalized(const FlowState& state) {
    state.validate();
    FlowStep out;
    out.state = state;
    const Matrix& x = state.X;
    Matrix next(x.rows(), x.cols());
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const PartitionOfUnity psi(x.col(i), state.lambda);
        next.col(i) = x.col(i) + state.h * (local_mean(psi, x) - x.col(i));
    }
    check_finite(next, state.k + 1);
    out.state.X = std::move(next);
    ++out.state.k;
    return out;
}

Vector normalized_step_frozen(const Vector& x, const Matrix& U, const Vector& xbar, double h) {
    const Vector projected = xbar + U * (U.transpose() * (x - xbar));
    return (1.0 - h) * x + h * projected;
}

FlowStep flow_step_normalized(const FlowState& state) {
    state.validate();
    if (state.tangent_d < 1) throw UsageError("flow: normalized step needs tangent_d >= 1");
    if (state.tangent_d > state.X.rows()) throw UsageError("flow: tangent_d exceeds the ambient dimension");
    FlowStep out;
    out.state = state;
    const Matrix& x = state.X;
    const Eigen::Index n = x.cols();
    const int d = state.tangent_d;
    Matrix next(x.rows(), n);
    std::vector<char> flag(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        const PartitionOfUnity psi(x.col(i), state.lambda);
        const Vector w = pou_weights(psi, x);
        const Vector xbar = (x * w) / w.sum();
        const Matrix centered = x.colwise() - xbar;
        Matrix scatter = centered * w.cwiseProduct(w).asDiagonal() * centered.transpose();
        scatter = 0.5 * (scatter + scatter.transpose());
        const EigenPairs eig = top_eigvectors(scatter, d);
        if (!(eig.values[d - 1] > 1e-12 * std::max(eig.values[0], 1e-300))) {
            flag[static_cast<std::size_t>(i)] = 1;
            next.col(i) = x.col(i);
            continue;
        }
        next.col(i) = normalized_step_frozen(x.col(i), eig.vectors, xbar, state.h);
    }
    check_finite(next, state.k + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        if (flag[static_cast<std::size_t>(i)]) out.flagged.push_back(static_cast<int>(i));
    out.state.X = std::move(next);
    ++out.state.k;
    return out;
}

Trajectory simulate(const Matrix& x0, int steps, double h, double lambda, int tangent_d, int record_every,
                    double eta) {
    if (steps < 1) throw UsageError("simulate: steps must be at least 1");
    if (record_every < 1) throw UsageError("simulate: record_every must be at least 1");
    FlowState state{x0, 0, h, lambda, tangent_d};
    state.validate();
    Trajectory traj;
    auto record = [&] {
        traj.steps.push_back(state.k);
        traj.snapshots.push_back(state.X);
        traj.proxies.push_back(flatness_proxy(state.X, eta, tangent_d).value);
    };
    record();
    for (int s = 1; s <= steps; ++s) {
        FlowStep step = flow_step_normalized(state);
        traj.flagged_total += static_cast<int>(step.flagged.size());
        state = std::move(step.state);
        if (s % record_every == 0 || s == steps) record();
    }
    return traj;
}

}  // namespace flatnet
