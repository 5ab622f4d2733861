#include "flatnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "flatnet/datasets.hpp"
#include "flatnet/kernels.hpp"
#include "flatnet/network.hpp"
#include "flatnet/rng.hpp"

#include <json.hpp>

namespace flatnet {

FlatnessProxy flatness_proxy(const Matrix& x, double eta, int d) {
    if (d < 0) throw UsageError("flatness_proxy: d must be non-negative");
    const int n = static_cast<int>(x.cols());
    const auto balls = kernels::ball_neighbors(x, eta);
    std::vector<double> residual(static_cast<std::size_t>(n), 0.0);
    std::vector<char> skipped(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        const auto& nb = balls[static_cast<std::size_t>(i)];
        const int m = static_cast<int>(nb.size());
        if (m < d + 1) {
            skipped[static_cast<std::size_t>(i)] = 1;
            continue;
        }
        Matrix local(x.rows(), m);
        for (int j = 0; j < m; ++j) local.col(j) = x.col(nb[static_cast<std::size_t>(j)]);
        local = local.colwise() - local.rowwise().mean();
        // Sum the trailing singular values directly; subtracting the leading
        // ones from the total would lose the flat case to cancellation.
        Eigen::BDCSVD<Matrix> svd(local);
        const Vector& sv = svd.singularValues();
        double tail = 0.0;
        for (Eigen::Index k = d; k < sv.size(); ++k) tail += sv[k] * sv[k];
        residual[static_cast<std::size_t>(i)] = std::sqrt(tail / m);
    }
    FlatnessProxy out;
    for (int i = 0; i < n; ++i) {
        out.value += residual[static_cast<std::size_t>(i)];
        out.skipped += skipped[static_cast<std::size_t>(i)];
    }
    return out;
}

double reconstruction_error(const FlatNetModel& model, const Matrix& x) {
    if (x.cols() == 0) return 0.0;
    const Matrix back = reconstruct(model, flatten(model, x));
    return (x - back).colwise().squaredNorm().mean();
}

double pca_reconstruction_error(const Matrix& x, int k) {
    const Vector mean = x.rowwise().mean();
    const Matrix centered = x.colwise() - mean;
    const Matrix cov = centered * centered.transpose() / static_cast<double>(x.cols());
    const Matrix u = top_eigvectors(0.5 * (cov + cov.transpose()), k).vectors;
    const Matrix resid = centered - u * (u.transpose() * centered);
    return resid.colwise().squaredNorm().mean();
}

EdmDistortion edm_distortion(const Matrix& features, const Matrix& coords) {
    if (features.cols() != coords.cols()) {
        throw UsageError("edm_distortion: features and intrinsic coordinates differ in sample count");
    }
    const Eigen::Index n = features.cols();
    EdmDistortion out;
    Matrix ratio = Matrix::Zero(n, n);
    double sum = 0.0;
    double sum_sq = 0.0;
    long count = 0;
    for (Eigen::Index q = 0; q < n; ++q) {
        for (Eigen::Index p = q + 1; p < n; ++p) {
            const double dc = (coords.col(p) - coords.col(q)).norm();
            if (!(dc > 0.0)) {
                ++out.excluded_pairs;
                continue;
            }
            const double r = (features.col(p) - features.col(q)).norm() / dc;
            ratio(p, q) = ratio(q, p) = r;
            out.max = std::max(out.max, r);
            sum += r;
            sum_sq += r * r;
            ++count;
        }
    }
    if (count > 0) {
        out.mean = sum / static_cast<double>(count);
        out.stddev = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(count) - out.mean * out.mean));
    }
    out.normalized = out.max > 0.0 ? Matrix(ratio / out.max) : ratio;
    return out;
}

namespace {

// Copy of x with a deterministic 1e-12-relative perturbation.
Matrix jitter_copy(const Matrix& x) {
    double scale = x.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) scale = 1.0;
    Rng rng(0x5eed, 7);
    Matrix out = x;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) += 1e-12 * scale * rng.normal();
    return out;
}

bool has_zero_neighbor(const kernels::Neighbors& nb) {
    for (const auto& dist : nb.dist)
        if (!(dist.front() > 0.0)) return true;
    return false;
}

}  // namespace

DimensionEstimateValue mle_dimension(const Matrix& x, int k) {
    const int n = static_cast<int>(x.cols());
    if (k < 2 || n <= k) throw UsageError("mle_dimension: need k >= 2 and N > k");
    DimensionEstimateValue out;
    kernels::Neighbors nb = kernels::knn(x, k);
    if (has_zero_neighbor(nb)) {
        out.jittered = true;
        nb = kernels::knn(jitter_copy(x), k);
    }
    double inverse_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& t = nb.dist[static_cast<std::size_t>(i)];
        const double tk = t[static_cast<std::size_t>(k - 1)];
        double s = 0.0;
        for (int j = 0; j < k - 1; ++j) s += std::log(tk / t[static_cast<std::size_t>(j)]);
        inverse_sum += s / (k - 1);  // 1 / m_k(x_i)
    }
    if (!(inverse_sum > 0.0)) throw NumericalError("mle_dimension: all neighbour distances tie");
    out.value = n / inverse_sum;
    return out;
}

DimensionEstimateValue twonn_dimension(const Matrix& x) {
    const int n = static_cast<int>(x.cols());
    if (n < 3) throw UsageError("twonn_dimension: need N >= 3");
    DimensionEstimateValue out;
    kernels::Neighbors nb = kernels::knn(x, 2);
    if (has_zero_neighbor(nb)) {
        out.jittered = true;
        nb = kernels::knn(jitter_copy(x), 2);
    }
    std::vector<double> mu(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& t = nb.dist[static_cast<std::size_t>(i)];
        mu[static_cast<std::size_t>(i)] = t[1] / t[0];
    }
    std::sort(mu.begin(), mu.end());
    const int keep = static_cast<int>(std::floor(0.9 * n));
    double sxy = 0.0;
    double sxx = 0.0;
    for (int i = 0; i < keep; ++i) {
        const double lx = std::log(mu[static_cast<std::size_t>(i)]);
        const double f = static_cast<double>(i + 1) / n;
        sxy += lx * -std::log(1.0 - f);
        sxx += lx * lx;
    }
    if (!(sxx > 0.0)) throw NumericalError("twonn_dimension: degenerate fit, all neighbour ratios equal 1");
    out.value = sxy / sxx;
    return out;
}

EvalReport evaluate(const FlatNetModel& model, const Matrix& x, const Matrix* coords, int mle_k) {
    if (x.rows() != model.D) throw DataError("evaluate: data dimension does not match the model");
    EvalReport r;
    const int n = static_cast<int>(x.cols());
    const Matrix z = flatten(model, x);
    r.recon_error = (x - reconstruct(model, z)).colwise().squaredNorm().mean();
    if (!model.layers.empty()) r.flatnet_dim = global_dimension(model);

    r.mle_k = std::min(mle_k, n - 1);
    if (r.mle_k >= 2) r.mle = mle_dimension(x, r.mle_k);
    if (n >= 3) r.twonn = twonn_dimension(x);

    if (model.head) {
        r.proxy_dim = static_cast<int>(model.head->U.cols());
    } else if (r.flatnet_dim) {
        r.proxy_dim = *r.flatnet_dim;
    } else if (r.twonn) {
        r.proxy_dim = std::clamp(static_cast<int>(std::lround(r.twonn->value)), 1, model.D);
    } else {
        r.proxy_dim = 1;
    }
    r.proxy_eta = model.hp.halt.eta > 0.0 ? model.hp.halt.eta : 0.2 * diameter(x);
    r.flatness_proxy = flatness_proxy(z, r.proxy_eta, r.proxy_dim).value;

    if (coords) r.edm = edm_distortion(z, *coords);
    return r;
}

std::string eval_report_json(const EvalReport& r) {
    using nlohmann::json;
    auto estimate = [](const std::optional<DimensionEstimateValue>& e) -> json {
        if (!e) return nullptr;
        return json{{"value", e->value}, {"jittered", e->jittered}};
    };
    json j;
    j["recon_error"] = r.recon_error;
    j["flatness_proxy"] = r.flatness_proxy;
    j["proxy_eta"] = r.proxy_eta;
    j["proxy_dim"] = r.proxy_dim;
    json dims;
    dims["flatnet"] = r.flatnet_dim ? json(*r.flatnet_dim) : json(nullptr);
    dims["mle"] = estimate(r.mle);
    dims["mle_k"] = r.mle_k;
    dims["mle_average"] = "reciprocal mean of per-point estimates";
    dims["twonn"] = estimate(r.twonn);
    dims["twonn_discard_fraction"] = 0.1;
    j["dim_estimates"] = std::move(dims);
    if (r.edm) {
        j["edm_ratio_stats"] = json{{"max", r.edm->max},
                                    {"mean", r.edm->mean},
                                    {"stddev", r.edm->stddev},
                                    {"excluded_pairs", r.edm->excluded_pairs}};
    } else {
        j["edm_ratio_stats"] = nullptr;
    }
    return j.dump(2) + "\n";
}

}  // namespace flatnet
