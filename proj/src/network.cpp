#include "flatnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "flatnet/metrics.hpp"
#include "flatnet/rng.hpp"

namespace flatnet {

using json = nlohmann::json;

LayerFit fit_layer(const Matrix& z, const Vector& x0, const Hyperparams& hp, int d_start) {
    LayerFit out;
    LayerRecord& rec = out.record;
    const int dim = static_cast<int>(z.rows());
    const PartitionOfUnity psi0(x0, hp.lambda0);

    DimensionEstimate est;
    try {
        est = estimate_local_dimension(z, x0, psi0, hp.eps_dim, std::clamp(d_start, 1, dim), hp.stiefel);
    } catch (const NumericalError& e) {
        rec.note = e.what();
        return out;
    }
    rec.d_hat = est.d;
    rec.loss = est.fit.loss;
    if (est.d == dim) {
        rec.note = "local dimension equals ambient dimension";
        return out;
    }

    const LambdaSelection sel = select_lambda(z, x0, est.d, hp.eps_pou, hp.lambda_min, hp.lambda_max, hp.stiefel);
    rec.lambda = sel.lambda;
    rec.ell = sel.ell;
    if (!sel.warning.empty()) rec.note = sel.warning;
    if (sel.fit.degenerate()) {
        std::ostringstream os;
        os << "degenerate fit (effective samples " << sel.fit.effective_samples
           << (sel.fit.unique_v ? "" : ", rank-deficient design") << ")";
        rec.note = os.str();
        return out;
    }

    const PartitionOfUnity psi = finalize_pou(sel.lambda, sel.ell, hp.eps_pou, hp.alpha_max, x0);
    rec.alpha = psi.alpha;
    LocalQuadraticModel model{x0, local_mean(psi, z), sel.fit.U, sel.fit.V};
    out.layer = FlatLayer(std::move(model), psi);
    rec.accepted = true;
    return out;
}

namespace {

int mode_of(const std::map<int, int>& counts) {
    int best = 0;
    int best_count = 0;
    for (const auto& [d, c] : counts) {
        if (c > best_count) {  // ascending keys, so ties keep the smaller d
            best = d;
            best_count = c;
        }
    }
    return best;
}

}  // namespace

FlatNetModel construct(const PointCloud& pc, const Hyperparams& hp, std::uint64_t seed, const ProgressFn& progress) {
    pc.validate();
    hp.validate();
    const int n = pc.size();
    if (n < 2) throw DataError("construct: need at least 2 samples");

    FlatNetModel model;
    model.D = pc.dim();
    model.hp = hp;

    double diam = diameter(pc.X);
    if (!(diam > 0.0)) diam = 1.0;
    const double eta = hp.halt.eta > 0.0 ? hp.halt.eta : 0.2 * diam;
    const double min_gain = hp.halt.flat_tol * n * diam;

    Rng rng(seed, 0x10000);
    Matrix z = pc.X;
    std::map<int, int> d_counts;
    int proxy_d = 0;
    double best = 0.0;
    int stall = 0;
    int consecutive_rejects = 0;
    int accepted = 0;
    int d_start = 1;

    for (int iter = 0; accepted < hp.L_max && stall < hp.halt.patience; ++iter) {
        const int idx = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
        const Vector x0 = z.col(idx);
        LayerFit fit = fit_layer(z, x0, hp, d_start);
        LayerRecord rec = std::move(fit.record);
        rec.iteration = iter;
        rec.x0_index = idx;

        if (fit.layer) {
            ++accepted;
            consecutive_rejects = 0;
            d_start = rec.d_hat;
            ++d_counts[rec.d_hat];
            const int mode = mode_of(d_counts);
            if (mode != proxy_d) {
                // Proxies at different d are not comparable; restart the
                // reference from the data before this layer.
                proxy_d = mode;
                best = flatness_proxy(z, eta, proxy_d).value;
            }
            z = flatten_forward(*fit.layer, z);
            model.layers.push_back(std::move(*fit.layer));
        } else {
            ++consecutive_rejects;
        }

        if (proxy_d > 0) {
            rec.proxy = flatness_proxy(z, eta, proxy_d).value;
            if (fit.layer && best - rec.proxy >= min_gain) {
                best = rec.proxy;
                stall = 0;
            } else {
                ++stall;
            }
        } else {
            ++stall;
        }
        if (progress) progress(rec);
        model.log.push_back(std::move(rec));

        if (!z.allFinite()) {
            throw NumericalError("construct: non-finite features after iteration " + std::to_string(iter));
        }
        if (consecutive_rejects >= hp.halt.patience) {
            model.warnings.push_back("construct: every base point in the last " + std::to_string(consecutive_rejects) +
                                     " iterations was rejected; returning the layers built so far");
        }
    }
    for (const auto& r : model.log) {
        if (r.note.rfind("lambda search fell back", 0) == 0) {
            model.warnings.push_back("iteration " + std::to_string(r.iteration) + ": " + r.note);
        }
    }
    return model;
}

Matrix flatten(const FlatNetModel& model, const Matrix& x) {
    if (x.rows() != model.D) throw UsageError("flatten: ambient dimension mismatch");
    Matrix z = x;
    for (const auto& layer : model.layers) z = flatten_forward(layer, z);
    return z;
}

Matrix reconstruct(const FlatNetModel& model, const Matrix& z) {
    if (z.rows() != model.D) throw UsageError("reconstruct: ambient dimension mismatch");
    Matrix x = z;
    for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) x = reconstruct_backward(*it, x);
    return x;
}

int global_dimension(const FlatNetModel& model) {
    std::map<int, int> counts;
    for (const auto& r : model.log)
        if (r.accepted) ++counts[r.d_hat];
    if (counts.empty()) throw UsageError("global_dimension: model has no accepted layers");
    return mode_of(counts);
}

void fit_head(FlatNetModel& model, const Matrix& x, std::optional<int> d) {
    const int k = d ? *d : global_dimension(model);
    if (k < 1 || k > model.D) throw UsageError("fit_head: head dimension out of range");
    const Matrix z = flatten(model, x);
    PcaHead head;
    head.z0 = z.rowwise().mean();
    const Matrix centered = z.colwise() - head.z0;
    Matrix cov = centered * centered.transpose() / static_cast<double>(z.cols());
    cov = 0.5 * (cov + cov.transpose());
    head.U = top_eigvectors(cov, k).vectors;
    model.head = std::move(head);
}

namespace {

const PcaHead& require_head(const FlatNetModel& model) {
    if (!model.head) throw UsageError("model has no PCA head; train with a head first");
    return *model.head;
}

}  // namespace

Matrix encode(const FlatNetModel& model, const Matrix& x) {
    const PcaHead& h = require_head(model);
    return h.U.transpose() * (flatten(model, x).colwise() - h.z0);
}

Matrix decode(const FlatNetModel& model, const Matrix& codes) {
    const PcaHead& h = require_head(model);
    if (codes.rows() != h.U.cols()) throw UsageError("decode: code dimension mismatch");
    return reconstruct(model, (h.U * codes).colwise() + h.z0);
}

Vector encode(const FlatNetModel& model, const Vector& x) { return encode(model, Matrix(x)).col(0); }
Vector decode(const FlatNetModel& model, const Vector& code) { return decode(model, Matrix(code)).col(0); }

// ---- persistence ----

namespace {

json vec_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json rows_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vec_json(m.row(i).transpose()));
    return out;
}

json cols_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(vec_json(m.col(j)));
    return out;
}

[[noreturn]] void schema(const std::string& field, const std::string& what) {
    throw DataError("model file: field '" + field + "' " + what);
}

const json& at(const json& j, const char* key, const std::string& where) {
    const std::string field = where.empty() ? key : where + "." + key;
    if (!j.is_object()) schema(where.empty() ? "<root>" : where, "is not an object");
    auto it = j.find(key);
    if (it == j.end()) schema(field, "is missing");
    return *it;
}

double get_real(const json& j, const char* key, const std::string& where) {
    const json& v = at(j, key, where);
    if (!v.is_number()) schema(where + "." + key, "must be a number");
    return v.get<double>();
}

long long get_int(const json& j, const char* key, const std::string& where) {
    const json& v = at(j, key, where);
    if (!v.is_number_integer()) schema(where + "." + key, "must be an integer");
    return v.get<long long>();
}

Vector get_vec(const json& v, const std::string& field, Eigen::Index len) {
    if (!v.is_array()) schema(field, "must be an array");
    if (len >= 0 && static_cast<Eigen::Index>(v.size()) != len) {
        schema(field, "must have " + std::to_string(len) + " entries");
    }
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) schema(field + "[" + std::to_string(i) + "]", "must be a number");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

// rows x cols matrix stored as an array of `outer` arrays.
Matrix get_nested(const json& v, const std::string& field, Eigen::Index outer, Eigen::Index inner, bool by_rows) {
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != outer) {
        schema(field, "must be an array of " + std::to_string(outer) + " arrays");
    }
    Matrix m = by_rows ? Matrix(outer, inner) : Matrix(inner, outer);
    for (Eigen::Index i = 0; i < outer; ++i) {
        const Vector row = get_vec(v[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]", inner);
        if (by_rows)
            m.row(i) = row.transpose();
        else
            m.col(i) = row;
    }
    return m;
}

json hp_json(const Hyperparams& hp) {
    return json{{"L_max", hp.L_max},
                {"eps_dim", hp.eps_dim},
                {"lambda0", hp.lambda0},
                {"eps_pou", hp.eps_pou},
                {"lambda_max", hp.lambda_max},
                {"lambda_min", hp.lambda_min},
                {"alpha_max", hp.alpha_max},
                {"stiefel_max_iters", hp.stiefel.max_iters},
                {"stiefel_step0", hp.stiefel.step0},
                {"stiefel_grad_tol", hp.stiefel.grad_tol},
                {"flat_tol", hp.halt.flat_tol},
                {"patience", hp.halt.patience},
                {"eta", hp.halt.eta}};
}

Hyperparams hp_from(const json& j) {
    const std::string w = "hyperparams";
    Hyperparams hp;
    hp.L_max = static_cast<int>(get_int(j, "L_max", w));
    hp.eps_dim = get_real(j, "eps_dim", w);
    hp.lambda0 = get_real(j, "lambda0", w);
    hp.eps_pou = get_real(j, "eps_pou", w);
    hp.lambda_max = get_real(j, "lambda_max", w);
    hp.lambda_min = get_real(j, "lambda_min", w);
    hp.alpha_max = get_real(j, "alpha_max", w);
    hp.stiefel.max_iters = static_cast<int>(get_int(j, "stiefel_max_iters", w));
    hp.stiefel.step0 = get_real(j, "stiefel_step0", w);
    hp.stiefel.grad_tol = get_real(j, "stiefel_grad_tol", w);
    hp.halt.flat_tol = get_real(j, "flat_tol", w);
    hp.halt.patience = static_cast<int>(get_int(j, "patience", w));
    hp.halt.eta = get_real(j, "eta", w);
    return hp;
}

}  // namespace

std::string model_to_json(const FlatNetModel& model) {
    json j;
    j["version"] = kModelVersion;
    j["D"] = model.D;
    j["hyperparams"] = hp_json(model.hp);
    json layers = json::array();
    for (const auto& layer : model.layers) {
        const LocalQuadraticModel& m = layer.model();
        layers.push_back(json{{"d", m.intrinsic_dim()},
                              {"x0", vec_json(m.x0)},
                              {"xc", vec_json(m.xc)},
                              {"U", rows_json(m.U)},
                              {"V", cols_json(m.V.packed())},
                              {"lambda", layer.psi().lambda},
                              {"alpha", layer.psi().alpha}});
    }
    j["layers"] = std::move(layers);
    if (model.head) j["head"] = json{{"d", model.head->U.cols()}, {"U", rows_json(model.head->U)}, {"z0", vec_json(model.head->z0)}};
    json log = json::array();
    for (const auto& r : model.log) {
        log.push_back(json{{"iteration", r.iteration},
                           {"x0_index", r.x0_index},
                           {"d_hat", r.d_hat},
                           {"lambda", r.lambda},
                           {"alpha", r.alpha},
                           {"ell", r.ell},
                           {"loss", r.loss},
                           {"proxy", r.proxy},
                           {"accepted", r.accepted},
                           {"note", r.note}});
    }
    j["log"] = std::move(log);
    j["warnings"] = model.warnings;
    return j.dump(1) + "\n";
}

FlatNetModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("model file: not valid JSON (truncated?): ") + e.what());
    }
    const long long version = get_int(j, "version", "");
    if (version != kModelVersion) {
        throw DataError("model file: field 'version' is " + std::to_string(version) + ", expected " +
                        std::to_string(kModelVersion));
    }
    FlatNetModel model;
    model.D = static_cast<int>(get_int(j, "D", ""));
    if (model.D < 1) schema("D", "must be positive");
    const Eigen::Index dim = model.D;
    model.hp = hp_from(at(j, "hyperparams", ""));

    const json& layers = at(j, "layers", "");
    if (!layers.is_array()) schema("layers", "must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string w = "layers[" + std::to_string(i) + "]";
        const json& l = layers[i];
        const long long d = get_int(l, "d", w);
        if (d < 1 || d > dim) schema(w + ".d", "out of range");
        LocalQuadraticModel m;
        m.x0 = get_vec(at(l, "x0", w), w + ".x0", dim);
        m.xc = get_vec(at(l, "xc", w), w + ".xc", dim);
        m.U = get_nested(at(l, "U", w), w + ".U", dim, d, true);
        m.V = SymTensor3(model.D, static_cast<int>(d));
        m.V.packed() = get_nested(at(l, "V", w), w + ".V", SymTensor3::packed_size(static_cast<int>(d)), dim, false);
        const double lambda = get_real(l, "lambda", w);
        const double alpha = get_real(l, "alpha", w);
        try {
            PartitionOfUnity psi(m.x0, lambda, alpha);
            model.layers.emplace_back(std::move(m), std::move(psi));
        } catch (const Error& e) {
            schema(w, std::string("is invalid: ") + e.what());
        }
    }

    if (auto it = j.find("head"); it != j.end()) {
        const long long d = get_int(*it, "d", "head");
        if (d < 1 || d > dim) schema("head.d", "out of range");
        PcaHead h;
        h.U = get_nested(at(*it, "U", "head"), "head.U", dim, d, true);
        h.z0 = get_vec(at(*it, "z0", "head"), "head.z0", dim);
        model.head = std::move(h);
    }

    const json& log = at(j, "log", "");
    if (!log.is_array()) schema("log", "must be an array");
    for (std::size_t i = 0; i < log.size(); ++i) {
        const std::string w = "log[" + std::to_string(i) + "]";
        const json& e = log[i];
        LayerRecord r;
        r.iteration = static_cast<int>(get_int(e, "iteration", w));
        r.x0_index = static_cast<int>(get_int(e, "x0_index", w));
        r.d_hat = static_cast<int>(get_int(e, "d_hat", w));
        r.lambda = get_real(e, "lambda", w);
        r.alpha = get_real(e, "alpha", w);
        r.ell = get_real(e, "ell", w);
        r.loss = get_real(e, "loss", w);
        r.proxy = get_real(e, "proxy", w);
        const json& acc = at(e, "accepted", w);
        if (!acc.is_boolean()) schema(w + ".accepted", "must be a boolean");
        r.accepted = acc.get<bool>();
        const json& note = at(e, "note", w);
        if (!note.is_string()) schema(w + ".note", "must be a string");
        r.note = note.get<std::string>();
        model.log.push_back(std::move(r));
    }
    if (auto it = j.find("warnings"); it != j.end() && it->is_array()) {
        for (const auto& w : *it)
            if (w.is_string()) model.warnings.push_back(w.get<std::string>());
    }
    return model;
}

void save_model(const FlatNetModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << model_to_json(model);
    if (!out) throw DataError("failed writing " + path.string());
}

FlatNetModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace flatnet
