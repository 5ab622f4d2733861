#include "flatnet/local_model.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "flatnet/datasets.hpp"
#include "flatnet/kernels.hpp"

namespace flatnet {

void Hyperparams::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw UsageError("hyperparameter " + field + ": " + why);
    };
    if (L_max < 0) fail("L_max", "must be non-negative");
    if (!(eps_dim > 0.0)) fail("eps_dim", "must be positive");
    if (!(lambda0 > 0.0)) fail("lambda0", "must be positive");
    if (!(eps_pou > 0.0)) fail("eps_pou", "must be positive");
    if (!(lambda_min > 0.0)) fail("lambda_min", "must be positive");
    if (!(lambda_min < lambda_max)) fail("lambda_max", "must exceed lambda_min");
    if (!(alpha_max > 0.0 && alpha_max < 1.0)) fail("alpha_max", "must lie in (0, 1)");
    if (stiefel.max_iters < 0) fail("stiefel.max_iters", "must be non-negative");
    if (!(stiefel.step0 > 0.0)) fail("stiefel.step0", "must be positive");
    if (!(stiefel.grad_tol > 0.0)) fail("stiefel.grad_tol", "must be positive");
    if (!(halt.flat_tol > 0.0)) fail("halt.flat_tol", "must be positive");
    if (halt.patience < 1) fail("halt.patience", "must be at least 1");
    if (!(halt.eta >= 0.0)) fail("halt.eta", "must be non-negative");
}

Hyperparams Hyperparams::defaults_for(const Matrix& x) {
    const double var = total_variance(x);
    double diam = diameter(x);
    if (!(diam > 0.0)) diam = 1.0;
    const double v = var > 0.0 ? var : 1.0;
    Hyperparams hp;
    hp.eps_dim = 1e-3 * v;
    hp.eps_pou = 1e-4 * v;
    hp.lambda0 = lambda_for_radius(0.2 * diam);
    hp.lambda_max = lambda_for_radius(0.05 * diam);
    hp.lambda_min = lambda_for_radius(diam);
    hp.halt.eta = 0.2 * diam;
    return hp;
}

bool LocalFit::degenerate() const {
    const int m = SymTensor3::packed_size(static_cast<int>(U.cols()));
    return !unique_v || effective_samples < m;
}

namespace {

// Quantities shared by every loss evaluation at one base point.
struct LocalProblem {
    Matrix r;  // x_i - x0
    Vector w;  // psi(x_i)^2
    double m2 = 0.0;
    double ess = 0.0;

    LocalProblem(const Matrix& X, const Vector& x0, const PartitionOfUnity& psi) {
        r = X.colwise() - x0;
        const Vector p = pou_weights(psi, X);
        w = p.cwiseProduct(p);
        m2 = r.colwise().squaredNorm().dot(w.transpose()) / static_cast<double>(X.cols());
        const double s1 = w.sum();
        const double s2 = w.squaredNorm();
        ess = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
    }
};

struct Evaluation {
    Matrix v_packed;
    double loss = 0.0;
    bool unique = true;
    int rank = 0;
};

Evaluation evaluate(const LocalProblem& prob, const Matrix& u) {
    const int dim = static_cast<int>(u.rows());
    const int d = static_cast<int>(u.cols());
    Evaluation ev;
    if (!(prob.w.maxCoeff() > 0.0)) {
        ev.v_packed = Matrix::Zero(dim, SymTensor3::packed_size(d));
        ev.loss = 0.0;
        ev.unique = false;
        return ev;
    }
    const Matrix c = u.transpose() * prob.r;
    const Matrix design = kernels::quadratic_design(c);
    const Matrix targets = prob.r - u * c;
    const LeastSquaresResult ls = weighted_least_squares(design, targets.transpose(), prob.w);
    ev.v_packed = ls.solution.transpose();
    ev.unique = ls.full_rank;
    ev.rank = ls.rank;
    ev.loss = kernels::quadratic_loss(u, ev.v_packed, prob.r, prob.w);
    return ev;
}

SymTensor3 to_tensor(const Matrix& v_packed, int d) {
    SymTensor3 v(static_cast<int>(v_packed.rows()), d);
    v.packed() = v_packed;
    return v;
}

}  // namespace

double recon_loss(const Matrix& U, const SymTensor3& V, const Matrix& X, const Vector& x0,
                  const PartitionOfUnity& psi) {
    const LocalProblem prob(X, x0, psi);
    return kernels::quadratic_loss(U, V.packed(), prob.r, prob.w);
}

VSolution solve_v(const Matrix& U, const Matrix& X, const Vector& x0, const PartitionOfUnity& psi) {
    const LocalProblem prob(X, x0, psi);
    const Evaluation ev = evaluate(prob, U);
    return {to_tensor(ev.v_packed, static_cast<int>(U.cols())), ev.unique, ev.rank};
}

Matrix weighted_pca_init(const Matrix& X, const Vector& x0, const PartitionOfUnity& psi, int d) {
    const LocalProblem prob(X, x0, psi);
    const Matrix s = prob.r * prob.w.asDiagonal() * prob.r.transpose();
    return top_eigvectors(0.5 * (s + s.transpose()), d).vectors;
}

LocalFit optimize_u(const Matrix& X, const Vector& x0, const PartitionOfUnity& psi, int d,
                    const StiefelOptions& opts, const std::optional<Matrix>& init) {
    const int dim = static_cast<int>(X.rows());
    if (d < 1 || d > dim) throw UsageError("optimize_u: need 1 <= d <= D");
    const LocalProblem prob(X, x0, psi);

    LocalFit fit;
    fit.effective_samples = prob.ess;
    Matrix u = init ? qr_orthonormalize(*init) : weighted_pca_init(X, x0, psi, d);
    if (u.rows() != dim || u.cols() != d) throw UsageError("optimize_u: init has the wrong shape");

    if (d == dim) {
        // Nothing is normal to a full basis: targets vanish and V = 0.
        fit.U = std::move(u);
        fit.V = SymTensor3(dim, d);
        fit.loss = 0.0;
        fit.loss_history = {0.0};
        return fit;
    }

    Evaluation cur = evaluate(prob, u);
    fit.loss_history.push_back(cur.loss);
    const double scale = prob.m2;
    if (scale > 0.0) {
        for (int iter = 0; iter < opts.max_iters; ++iter) {
            if (!std::isfinite(cur.loss)) {
                throw NumericalError("optimize_u: non-finite loss at iteration " + std::to_string(iter));
            }
            if (cur.loss <= 1e-30 * scale) break;
            const Matrix g = kernels::quadratic_loss_gradient(u, cur.v_packed, prob.r, prob.w);
            const Matrix ug = u.transpose() * g;
            const Matrix rgrad = g - u * (0.5 * (ug + ug.transpose()));
            const double gnorm2 = rgrad.squaredNorm();
            if (std::sqrt(gnorm2) <= opts.grad_tol * scale) break;

            double step = opts.step0 / scale;
            bool accepted = false;
            for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
                Matrix cand;
                try {
                    cand = qr_orthonormalize(u - step * rgrad);
                } catch (const NumericalError&) {
                    continue;
                }
                Evaluation next = evaluate(prob, cand);
                if (!std::isfinite(next.loss)) {
                    throw NumericalError("optimize_u: non-finite loss during line search at iteration " +
                                         std::to_string(iter));
                }
                if (next.loss <= cur.loss - 1e-4 * step * gnorm2) {
                    u = std::move(cand);
                    cur = std::move(next);
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
            fit.iterations = iter + 1;
            fit.loss_history.push_back(cur.loss);
        }
    }
    fit.U = std::move(u);
    fit.V = to_tensor(cur.v_packed, d);
    fit.loss = cur.loss;
    fit.unique_v = cur.unique;
    return fit;
}

LocalFit recon(int d, const PartitionOfUnity& psi, const Matrix& X, const Vector& x0, const StiefelOptions& opts) {
    return optimize_u(X, x0, psi, d, opts);
}

DimensionEstimate estimate_local_dimension(const Matrix& X, const Vector& x0, const PartitionOfUnity& psi0,
                                           double eps_dim, int d_start, const StiefelOptions& opts) {
    const int dim = static_cast<int>(X.rows());
    if (d_start < 1 || d_start > dim) throw UsageError("estimate_local_dimension: d_start out of range");
    DimensionEstimate out;
    std::map<int, LocalFit> fits;
    auto ok = [&](int d) {
        auto it = fits.find(d);
        if (it == fits.end()) {
            ++out.recon_calls;
            it = fits.emplace(d, recon(d, psi0, X, x0, opts)).first;
        }
        return it->second.loss <= eps_dim;
    };

    int d = d_start;
    if (ok(d)) {
        while (d > 1 && ok(d - 1)) --d;
    } else {
        do {
            ++d;
        } while (d <= dim && !ok(d));
        if (d > dim) {
            throw NumericalError("estimate_local_dimension: reconstruction threshold not met even at d = D");
        }
    }
    out.d = d;
    out.fit = fits.at(d);
    return out;
}

LambdaSelection select_lambda(const Matrix& X, const Vector& x0, int d, double eps_pou, double lambda_min,
                              double lambda_max, const StiefelOptions& opts) {
    if (!(lambda_min > 0.0 && lambda_min < lambda_max)) {
        throw UsageError("select_lambda: need 0 < lambda_min < lambda_max");
    }
    LambdaSelection out;
    std::map<double, LocalFit> cache;
    auto ell_log = [&](double log_lambda) -> const LocalFit& {
        auto it = cache.find(log_lambda);
        if (it == cache.end()) {
            ++out.evaluations;
            const PartitionOfUnity psi(x0, std::exp(log_lambda));
            it = cache.emplace(log_lambda, recon(d, psi, X, x0, opts)).first;
        }
        return it->second;
    };
    const double lo = std::log(lambda_min);
    const double hi = std::log(lambda_max);

    const LocalFit& at_max = ell_log(hi);
    if (at_max.loss > eps_pou) {
        out.lambda = lambda_max;
        out.ell = at_max.loss;
        out.fit = at_max;
        out.clamped_high = true;
        return out;
    }
    const LocalFit& at_min = ell_log(lo);
    if (at_min.loss <= eps_pou) {
        out.lambda = lambda_min;
        out.ell = at_min.loss;
        out.fit = at_min;
        out.clamped_low = true;
        return out;
    }
    try {
        const double root = scalar_root_find([&](double t) { return ell_log(t).loss; }, eps_pou, {lo, hi},
                                             kLambdaRootTol * eps_pou);
        const LocalFit& fit = ell_log(root);
        out.lambda = std::exp(root);
        out.ell = fit.loss;
        out.fit = fit;
    } catch (const NumericalError& e) {
        out.lambda = lambda_max;
        out.ell = cache.at(hi).loss;
        out.fit = cache.at(hi);
        out.warning = std::string("lambda search fell back to lambda_max: ") + e.what();
    }
    return out;
}

PartitionOfUnity finalize_pou(double lambda, double ell, double eps_pou, double alpha_max, const Vector& x0) {
    if (!(ell >= 0.0)) throw UsageError("finalize_pou: ell must be non-negative");
    const double alpha = ell > 0.0 ? std::min(alpha_max, std::sqrt(eps_pou / ell)) : alpha_max;
    return PartitionOfUnity(x0, lambda, alpha);
}

}  // namespace flatnet
