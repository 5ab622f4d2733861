#pragma once

#include <vector>

#include "flatnet/linalg.hpp"

namespace flatnet {

// Point cloud evolving under the discretized convexification flow. Every
// point is pulled toward its local mean under psi(y) = exp(-lambda |y - x|^2).
struct FlowState {
    Matrix X;
    int k = 0;
    double h = 0.5;
    double lambda = 1.0;
    int tangent_d = 1;

    // Throws UsageError unless h is in [0, 1], lambda > 0 and tangent_d >= 0.
    void validate() const;
};

struct FlowStep {
    FlowState state;
    std::vector<int> flagged;  // points left in place because their neighbourhood had rank < tangent_d
};

// x <- x + h (xbar - x) for every point, all from the previous cloud.
FlowStep flow_step_unnormalized(const FlowState& state);

// x <- (1 - h) x + h (xbar + U U^T (x - xbar)), with U the top tangent_d
// directions of the psi^2-weighted scatter about xbar. Only the normal part
// of xbar - x moves the point.
FlowStep flow_step_normalized(const FlowState& state);

// One normalized step for a single point with U and xbar given.
Vector normalized_step_frozen(const Vector& x, const Matrix& U, const Vector& xbar, double h);

struct Trajectory {
    std::vector<int> steps;
    std::vector<Matrix> snapshots;
    std::vector<double> proxies;  // flatness proxy of each snapshot at radius eta, dimension tangent_d
    int flagged_total = 0;
};

// Runs `steps` normalized steps, recording the initial cloud and every
// record_every-th step (and always the last).
Trajectory simulate(const Matrix& x0, int steps, double h, double lambda, int tangent_d, int record_every,
                    double eta);

}  // namespace flatnet
