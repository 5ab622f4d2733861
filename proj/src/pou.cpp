#include "flatnet/pou.hpp"

#include <cmath>

namespace flatnet {

PartitionOfUnity::PartitionOfUnity(Vector base, double lambda_, double alpha_)
    : x0(std::move(base)), lambda(lambda_), alpha(alpha_) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw UsageError("partition of unity: lambda must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("partition of unity: alpha must lie in (0, 1]");
}

double pou_eval(const PartitionOfUnity& p, const Vector& x) {
    return p.alpha * std::exp(-p.lambda * (x - p.x0).squaredNorm());
}

double PartitionOfUnity::operator()(const Vector& x) const { return pou_eval(*this, x); }

double pou_radius(const PartitionOfUnity& p, double eps) {
    if (!(eps > 0.0) || !(eps < p.alpha)) throw UsageError("pou_radius: need 0 < eps < alpha");
    return std::sqrt(std::log(p.alpha / eps) / p.lambda);
}

double lambda_for_radius(double radius, double eps) {
    if (!(radius > 0.0)) throw UsageError("lambda_for_radius: radius must be positive");
    return std::log(1.0 / eps) / (radius * radius);
}

Vector pou_weights(const PartitionOfUnity& p, const Matrix& x) {
    const Vector sq = (x.colwise() - p.x0).colwise().squaredNorm().transpose();
    return p.alpha * (-p.lambda * sq.array()).exp().matrix();
}

Vector local_mean(const PartitionOfUnity& p, const Matrix& x) {
    if (x.cols() < 1) throw UsageError("local_mean: empty point set");
    // alpha cancels; shifting the exponent by its minimum keeps the weights
    // representable when every point is far from x0.
    const Vector sq = (x.colwise() - p.x0).colwise().squaredNorm().transpose();
    const double shift = sq.minCoeff();
    const Vector w = (-p.lambda * (sq.array() - shift)).exp().matrix();
    return (x * w) / w.sum();
}

}  // namespace flatnet
