#pragma once

#include <optional>
#include <string>

#include "flatnet/linalg.hpp"

namespace flatnet {

class FlatNetModel;

// Computable stand-in for the local convexity potential: for every sample,
// the RMS residual of the best rank-d affine fit to the samples within eta,
// summed over samples. Balls with fewer than d + 1 points are skipped and
// counted. Boundary effects are not treated specially.
struct FlatnessProxy {
    double value = 0.0;
    int skipped = 0;
};
FlatnessProxy flatness_proxy(const Matrix& x, double eta, int d);

// Mean squared round-trip error (1/N) sum |x_i - g(f(x_i))|^2.
double reconstruction_error(const FlatNetModel& model, const Matrix& x);

// Same quantity for a rank-k PCA projection about the mean.
double pca_reconstruction_error(const Matrix& x, int k);

// Ratios |z_p - z_q| / |c_p - c_q| over distinct pairs. `normalized` holds
// the ratios divided by their maximum (diagonal and excluded pairs are 0);
// the statistics are over the raw ratios.
struct EdmDistortion {
    Matrix normalized;
    double max = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    int excluded_pairs = 0;
};
EdmDistortion edm_distortion(const Matrix& features, const Matrix& coords);

struct DimensionEstimateValue {
    double value = 0.0;
    bool jittered = false;  // duplicate points were perturbed by 1e-12
};

// Levina-Bickel MLE with k neighbours. Per-point estimates are combined by
// the reciprocal mean, 1 / mean(1 / m_k(x_i)) (MacKay-Ghahramani).
DimensionEstimateValue mle_dimension(const Matrix& x, int k);

// TwoNN: regression through the origin of -log(1 - F(mu)) on log mu with
// mu = r2 / r1, F the empirical CDF, the largest 10% of mu discarded.
DimensionEstimateValue twonn_dimension(const Matrix& x);

struct EvalReport {
    double recon_error = 0.0;
    double flatness_proxy = 0.0;
    double proxy_eta = 0.0;
    int proxy_dim = 0;
    std::optional<int> flatnet_dim;  // global_dimension, absent for a model without layers
    int mle_k = 0;
    std::optional<DimensionEstimateValue> mle;    // absent when N <= 2
    std::optional<DimensionEstimateValue> twonn;  // absent when N < 3
    std::optional<EdmDistortion> edm;
};

// Metrics of a trained model on a dataset. The proxy uses the model's halt
// radius and the head dimension, else global_dimension, else the rounded
// TwoNN estimate. EDM needs coords and is computed on the flattened features.
EvalReport evaluate(const FlatNetModel& model, const Matrix& x, const Matrix* coords, int mle_k);

// JSON object without the EDM matrix (only its statistics).
std::string eval_report_json(const EvalReport& report);

}  // namespace flatnet
