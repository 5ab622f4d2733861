#include "flatnet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <utility>

#include <CLI11.hpp>

#include "flatnet/datasets.hpp"
#include "flatnet/flow.hpp"
#include "flatnet/metrics.hpp"
#include "flatnet/network.hpp"
#include "flatnet/rng.hpp"
#include "flatnet/svg.hpp"

namespace flatnet {

namespace fs = std::filesystem;

namespace {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

KeyValues read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        kv.emplace_back(key, trim(line.substr(eq + 1)));
    }
    return kv;
}

bool is_global_key(const std::string& key) { return key == "seed" || key == "out"; }

std::string real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Final value of every option that has one, in declaration order.
void collect(const CLI::App& app, KeyValues& kv) {
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config") continue;
        std::string value;
        if (opt->get_type_size() == 0) {
            value = opt->count() > 0 && opt->as<bool>() ? "true" : "false";
        } else if (opt->count() > 0) {
            value = join(opt->reduced_results(), ',');
        } else {
            value = opt->get_default_str();
            if (value.empty()) continue;
        }
        kv.emplace_back(name, value);
    }
}

void set_value(KeyValues& kv, const std::string& key, const std::string& value) {
    for (auto& [k, v] : kv) {
        if (k == key) {
            v = value;
            return;
        }
    }
    kv.emplace_back(key, value);
}

void write_resolved(const fs::path& dir, const std::string& command, const KeyValues& kv) {
    std::ofstream out(dir / "resolved_config.txt", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "resolved_config.txt").string());
    out << "# flatnet " << command << "\n";
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

struct Globals {
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string config;
};

// ---- gen ----

struct GenArgs {
    std::string kind;
    std::optional<int> n;
    int d = 2;
    int D = 10;
    double scale = 1.0;
    double amplitude = 1.0;
    double frequency = 1.0;
    std::optional<double> noise;
    double radius = 1.0;
    double arc = 1.0;
    bool augmented = false;
    std::string name = "data";
};

void cmd_gen(const GenArgs& a, const Globals& g, KeyValues kv, std::ostream& out) {
    PointCloud pc;
    if (a.kind == "gp") {
        GpManifoldParams p;
        p.intrinsic_dim = a.d;
        p.ambient_dim = a.D;
        p.count = a.n.value_or(500);
        p.scales = Vector::Constant(a.D, a.scale);
        pc = gen_gp_manifold(p, g.seed).cloud;
    } else if (a.kind == "sine") {
        pc = gen_sine({a.n.value_or(50), a.amplitude, a.frequency, a.noise.value_or(0.05)}, g.seed);
    } else if (a.kind == "circle") {
        pc = gen_circle({a.n.value_or(200), a.radius, a.arc, a.noise.value_or(0.0)}, g.seed);
    } else {
        pc = gen_swiss_roll(a.n.value_or(3000), a.augmented, g.seed);
    }
    const fs::path dir = g.out;
    ensure_dir(dir);
    const fs::path path = dir / (a.name + ".csv");
    save_csv(pc, path);
    set_value(kv, "n", std::to_string(pc.size()));
    write_resolved(dir, "gen", kv);
    out << "wrote " << path.string() << " (D=" << pc.dim() << ", N=" << pc.size() << ")\n";
}

// ---- train ----

struct TrainArgs {
    std::string data;
    std::optional<int> L_max;
    std::optional<double> eps_dim, lambda0, eps_pou, lambda_max, lambda_min, alpha_max;
    std::optional<int> stiefel_iters;
    std::optional<double> step0, grad_tol, flat_tol, eta;
    std::optional<int> patience;
    std::optional<int> head_dim;
    bool verbose = false;
};

Hyperparams resolve_hyperparams(const TrainArgs& a, const Matrix& x) {
    Hyperparams hp = Hyperparams::defaults_for(x);
    if (a.L_max) hp.L_max = *a.L_max;
    if (a.eps_dim) hp.eps_dim = *a.eps_dim;
    if (a.lambda0) hp.lambda0 = *a.lambda0;
    if (a.eps_pou) hp.eps_pou = *a.eps_pou;
    if (a.lambda_max) hp.lambda_max = *a.lambda_max;
    if (a.lambda_min) hp.lambda_min = *a.lambda_min;
    if (a.alpha_max) hp.alpha_max = *a.alpha_max;
    if (a.stiefel_iters) hp.stiefel.max_iters = *a.stiefel_iters;
    if (a.step0) hp.stiefel.step0 = *a.step0;
    if (a.grad_tol) hp.stiefel.grad_tol = *a.grad_tol;
    if (a.flat_tol) hp.halt.flat_tol = *a.flat_tol;
    if (a.patience) hp.halt.patience = *a.patience;
    if (a.eta) hp.halt.eta = *a.eta;
    hp.validate();
    return hp;
}

void record_hyperparams(KeyValues& kv, const Hyperparams& hp) {
    set_value(kv, "L-max", std::to_string(hp.L_max));
    set_value(kv, "eps-dim", real(hp.eps_dim));
    set_value(kv, "lambda0", real(hp.lambda0));
    set_value(kv, "eps-pou", real(hp.eps_pou));
    set_value(kv, "lambda-max", real(hp.lambda_max));
    set_value(kv, "lambda-min", real(hp.lambda_min));
    set_value(kv, "alpha-max", real(hp.alpha_max));
    set_value(kv, "stiefel-iters", std::to_string(hp.stiefel.max_iters));
    set_value(kv, "step0", real(hp.stiefel.step0));
    set_value(kv, "grad-tol", real(hp.stiefel.grad_tol));
    set_value(kv, "flat-tol", real(hp.halt.flat_tol));
    set_value(kv, "patience", std::to_string(hp.halt.patience));
    set_value(kv, "eta", real(hp.halt.eta));
}

void write_training_log(const FlatNetModel& m, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "iteration,layer,accepted,x0_index,d_hat,lambda,alpha,ell,loss,proxy,note\n";
    int layer = 0;
    for (const auto& r : m.log) {
        std::string note = r.note;
        std::replace(note.begin(), note.end(), ',', ';');
        out << r.iteration << ',' << (r.accepted ? layer++ : -1) << ',' << (r.accepted ? 1 : 0) << ',' << r.x0_index
            << ',' << r.d_hat << ',' << real(r.lambda) << ',' << real(r.alpha) << ',' << real(r.ell) << ','
            << real(r.loss) << ',' << real(r.proxy) << ',' << note << '\n';
    }
}

void cmd_train(const TrainArgs& a, const Globals& g, KeyValues kv, std::ostream& out, std::ostream& err) {
    // Everything that can fail on bad input happens before the first write.
    const PointCloud pc = load_csv(a.data);
    const Hyperparams hp = resolve_hyperparams(a, pc.X);
    ProgressFn progress;
    if (a.verbose) {
        progress = [&err](const LayerRecord& r) {
            err << "iter " << r.iteration << (r.accepted ? " accepted" : " rejected") << " d=" << r.d_hat
                << " lambda=" << r.lambda << " alpha=" << r.alpha << " ell=" << r.ell << " proxy=" << r.proxy
                << (r.note.empty() ? "" : " (" + r.note + ")") << '\n';
        };
    }
    FlatNetModel model = construct(pc, hp, g.seed, progress);
    if (!model.layers.empty() || a.head_dim) {
        fit_head(model, pc.X, a.head_dim);
    } else {
        model.warnings.push_back("no layer was accepted and --head-dim was not given; model has no head");
    }
    for (const auto& w : model.warnings) err << "warning: " << w << '\n';

    const fs::path dir = g.out;
    ensure_dir(dir);
    save_model(model, dir / "model.json");
    write_training_log(model, dir / "training_log.csv");
    record_hyperparams(kv, hp);
    write_resolved(dir, "train", kv);

    out << "layers " << model.layers.size() << " (iterations " << model.log.size() << ")";
    if (!model.layers.empty()) out << ", global dimension " << global_dimension(model);
    out << ", reconstruction error " << reconstruction_error(model, pc.X) << '\n';
}

// ---- eval ----

struct EvalArgs {
    std::string model;
    std::string data;
    bool edm = false;
    bool no_plot = false;
    std::optional<int> interp;
    int mle_k = 10;
};

void write_scatter(const FlatNetModel& m, const PointCloud& pc, const EvalArgs& a, std::uint64_t seed,
                   const fs::path& path) {
    SvgPlot plot;
    plot.title("data (blue), features (red), reconstructed interpolants (green)");
    plot.scatter("data", pc.X, "blue");
    plot.scatter("features", flatten(m, pc.X), "red");
    const int count = a.interp.value_or(2000);
    if (m.head && count > 0) {
        const Matrix codes = encode(m, pc.X);
        const int n = pc.size();
        const Eigen::Index k = codes.rows();
        Matrix test(k, count);
        if (k == 1) {
            // evenly spaced along the code range, drawn as a curve
            const double lo = codes.minCoeff(), hi = codes.maxCoeff();
            for (int i = 0; i < count; ++i) test(0, i) = lo + (hi - lo) * i / std::max(1, count - 1);
            plot.polyline("reconstructions", decode(m, test), "green");
        } else {
            Rng rng(seed, 0x1e7);
            for (int i = 0; i < count; ++i) {
                const auto p = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
                const auto q = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
                const double t = rng.uniform();
                test.col(i) = (1.0 - t) * codes.col(p) + t * codes.col(q);
            }
            plot.scatter("reconstructions", decode(m, test), "green", 1.0);
        }
    }
    plot.save(path);
}

void cmd_eval(const EvalArgs& a, const Globals& g, KeyValues kv, std::ostream& out) {
    const FlatNetModel m = load_model(a.model);
    const PointCloud pc = load_csv(a.data);
    if (pc.dim() != m.D) {
        throw DataError("data has dimension " + std::to_string(pc.dim()) + " but the model expects " +
                        std::to_string(m.D));
    }
    if (a.edm && !pc.coords) {
        throw DataError("--edm needs intrinsic coordinates, expected in " + coords_path_for(a.data).string());
    }
    if (a.interp && !m.head) throw UsageError("interpolation needs a model with a PCA head");

    const EvalReport report = evaluate(m, pc.X, a.edm ? &*pc.coords : nullptr, a.mle_k);
    const fs::path dir = g.out;
    ensure_dir(dir);
    {
        std::ofstream f(dir / "report.json", std::ios::binary);
        if (!f) throw DataError("cannot write report.json");
        f << eval_report_json(report);
    }
    if (report.edm) {
        save_matrix_csv(report.edm->normalized, dir / "edm.csv");
        std::ofstream f(dir / "edm.svg", std::ios::binary);
        f << heatmap_svg(report.edm->normalized);
    }
    if (!a.no_plot && (m.D == 2 || m.D == 3)) write_scatter(m, pc, a, g.seed, dir / "scatter.svg");
    write_resolved(dir, "eval", kv);
    out << eval_report_json(report);
}

// ---- flow ----

struct FlowArgs {
    std::string data;
    int steps = 200;
    double h = 0.5;
    std::optional<double> lambda;
    int d = 1;
    int record_every = 10;
    std::optional<double> eta;
};

void cmd_flow(const FlowArgs& a, const Globals& g, KeyValues kv, std::ostream& out) {
    const PointCloud pc = load_csv(a.data);
    if (a.d > pc.dim()) throw UsageError("--d exceeds the data dimension");
    double diam = diameter(pc.X);
    if (!(diam > 0.0)) diam = 1.0;
    const double lambda = a.lambda.value_or(lambda_for_radius(0.2 * diam));
    const double eta = a.eta.value_or(0.2 * diam);
    const Trajectory t = simulate(pc.X, a.steps, a.h, lambda, a.d, a.record_every, eta);

    const fs::path dir = g.out;
    ensure_dir(dir);
    std::ofstream proxy(dir / "proxy.csv", std::ios::binary);
    if (!proxy) throw DataError("cannot write proxy.csv");
    proxy << "step,proxy\n";
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%05d.csv", t.steps[i]);
        PointCloud snap;
        snap.X = t.snapshots[i];
        save_csv(snap, dir / name);
        proxy << t.steps[i] << ',' << real(t.proxies[i]) << '\n';
    }
    set_value(kv, "lambda", real(lambda));
    set_value(kv, "eta", real(eta));
    write_resolved(dir, "flow", kv);
    out << "snapshots " << t.steps.size() << ", proxy " << t.proxies.front() << " -> " << t.proxies.back();
    if (t.flagged_total > 0) out << ", " << t.flagged_total << " degenerate point-steps left in place";
    out << '\n';
}

// ---- dimsweep ----

struct SweepArgs {
    std::vector<int> dims{2, 3, 5};
    int D = 20;
    int n = 500;
    int trials = 3;
    std::optional<int> L_max;
    int mle_k = 10;
};

struct Stats {
    double mean = 0.0;
    double sd = 0.0;
};

Stats stats(const std::vector<double>& v) {
    Stats s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

void cmd_dimsweep(const SweepArgs& a, const Globals& g, KeyValues kv, std::ostream& out) {
    for (int d : a.dims)
        if (d < 1 || d > a.D) throw UsageError("--dims entries must lie in [1, D]");
    const fs::path dir = g.out;
    ensure_dir(dir);
    write_resolved(dir, "dimsweep", kv);
    std::ofstream trials(dir / "dimsweep_trials.csv", std::ios::binary);
    if (!trials) throw DataError("cannot write dimsweep_trials.csv");
    trials << "d_true,trial,seed,flatnet,mle,twonn,layers\n";

    std::ofstream table(dir / "dimsweep.csv", std::ios::binary);
    if (!table) throw DataError("cannot write dimsweep.csv");
    table << "d_true,flatnet_mean,flatnet_sd,mle_mean,mle_sd,twonn_mean,twonn_sd,flatnet_within_1\n";

    for (int d : a.dims) {
        std::vector<double> fl, ml, tw;
        int within = 0;
        for (int t = 0; t < a.trials; ++t) {
            const std::uint64_t seed = Rng::mix(g.seed, static_cast<std::uint64_t>(d) * 1000 + t);
            GpManifoldParams p;
            p.intrinsic_dim = d;
            p.ambient_dim = a.D;
            p.count = a.n;
            const PointCloud pc = gen_gp_manifold(p, seed).cloud;
            Hyperparams hp = Hyperparams::defaults_for(pc.X);
            if (a.L_max) hp.L_max = *a.L_max;
            const FlatNetModel m = construct(pc, hp, seed);
            const double gd = m.layers.empty() ? std::nan("") : global_dimension(m);
            const double mle = mle_dimension(pc.X, std::min(a.mle_k, a.n - 1)).value;
            const double two = twonn_dimension(pc.X).value;
            if (std::isfinite(gd)) fl.push_back(gd);
            if (std::abs(gd - d) <= 1.0) ++within;
            ml.push_back(mle);
            tw.push_back(two);
            trials << d << ',' << t << ',' << seed << ',' << gd << ',' << real(mle) << ',' << real(two) << ','
                   << m.layers.size() << '\n'
                   << std::flush;
            out << "d=" << d << " trial " << t << ": flatnet " << gd << ", mle " << mle << ", twonn " << two << '\n';
        }
        const Stats f = stats(fl), m = stats(ml), w = stats(tw);
        table << d << ',' << real(f.mean) << ',' << real(f.sd) << ',' << real(m.mean) << ',' << real(m.sd) << ','
              << real(w.mean) << ',' << real(w.sd) << ',' << within << '\n'
              << std::flush;
    }
}

const CLI::Range kPositiveInt(1, std::numeric_limits<int>::max());

int exit_code(const Error& e) { return static_cast<int>(e.code()); }

}  // namespace

std::vector<std::string> config_tokens(const std::string& path) {
    std::vector<std::string> tokens;
    for (const auto& [k, v] : read_config(path)) tokens.push_back("--" + k + "=" + v);
    return tokens;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"FlatNet: manifold flattening networks"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "random seed")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.add_option("--out", g.out, "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.add_option("--config", g.config, "key=value file; command-line flags take precedence");

    auto last = [](CLI::Option* o) { return o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast); };

    GenArgs ga;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    last(gen->add_option("kind,--kind", ga.kind, "gp | sine | circle | swissroll")
             ->required()
             ->check(CLI::IsMember({"gp", "sine", "circle", "swissroll"})));
    last(gen->add_option("--n", ga.n, "sample count"))->check(kPositiveInt);
    last(gen->add_option("--d", ga.d, "intrinsic dimension (gp)"))->check(kPositiveInt);
    last(gen->add_option("--D", ga.D, "ambient dimension (gp)"))->check(kPositiveInt);
    last(gen->add_option("--scale", ga.scale, "per-coordinate variance scale (gp)"))->check(CLI::PositiveNumber);
    last(gen->add_option("--amplitude", ga.amplitude, "sine amplitude"));
    last(gen->add_option("--frequency", ga.frequency, "sine frequency"))->check(CLI::PositiveNumber);
    last(gen->add_option("--noise", ga.noise, "Gaussian noise level (sine: y, circle: radial)"))
        ->check(CLI::NonNegativeNumber);
    last(gen->add_option("--radius", ga.radius, "circle radius"))->check(CLI::PositiveNumber);
    last(gen->add_option("--arc", ga.arc, "fraction of the circle covered"))->check(CLI::Range(0.0, 1.0));
    last(gen->add_flag("--augmented", ga.augmented, "swiss roll with a fourth coordinate"));
    last(gen->add_option("--name", ga.name, "output file stem"));

    TrainArgs ta;
    CLI::App* train = app.add_subcommand("train", "build a FlatNet on a dataset");
    last(train->add_option("--data", ta.data, "dataset CSV")->required());
    last(train->add_option("--L-max", ta.L_max, "maximum number of layers"))->check(CLI::NonNegativeNumber);
    last(train->add_option("--eps-dim", ta.eps_dim, "local dimension threshold"));
    last(train->add_option("--lambda0", ta.lambda0, "scale for dimension estimation"));
    last(train->add_option("--eps-pou", ta.eps_pou, "partition-of-unity loss target"));
    last(train->add_option("--lambda-max", ta.lambda_max, "largest allowed lambda"));
    last(train->add_option("--lambda-min", ta.lambda_min, "smallest allowed lambda"));
    last(train->add_option("--alpha-max", ta.alpha_max, "cap on the partition-of-unity height"));
    last(train->add_option("--stiefel-iters", ta.stiefel_iters, "tangent optimizer iterations"));
    last(train->add_option("--step0", ta.step0, "tangent optimizer initial step (relative)"));
    last(train->add_option("--grad-tol", ta.grad_tol, "tangent optimizer gradient tolerance (relative)"));
    last(train->add_option("--flat-tol", ta.flat_tol, "flatness improvement tolerance"));
    last(train->add_option("--patience", ta.patience, "iterations without improvement before halting"));
    last(train->add_option("--eta", ta.eta, "flatness proxy radius"));
    last(train->add_option("--head-dim", ta.head_dim, "PCA head dimension (default: global dimension)"))
        ->check(kPositiveInt);
    last(train->add_flag("--verbose", ta.verbose, "print one line per iteration"));

    EvalArgs ea;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a trained model");
    last(eval->add_option("--model", ea.model, "model JSON")->required());
    last(eval->add_option("--data", ea.data, "dataset CSV")->required());
    last(eval->add_flag("--edm", ea.edm, "EDM distortion against intrinsic coordinates"));
    last(eval->add_flag("--no-plot", ea.no_plot, "skip the scatter SVG"));
    last(eval->add_option("--interp", ea.interp, "number of interpolated codes to reconstruct"))
        ->check(CLI::NonNegativeNumber);
    last(eval->add_option("--mle-k", ea.mle_k, "neighbours for the MLE estimator"))->check(CLI::Range(2, 1000000));

    FlowArgs fa;
    CLI::App* flow = app.add_subcommand("flow", "simulate the convexification flow");
    flow->set_help_flag("--help", "print this help message and exit");  // -h would clash with --h
    last(flow->add_option("--data", fa.data, "dataset CSV")->required());
    last(flow->add_option("--steps", fa.steps, "number of steps"))->check(CLI::Range(1, 100000000));
    last(flow->add_option("--h", fa.h, "step size"))->check(CLI::Range(0.0, 1.0));
    last(flow->add_option("--lambda", fa.lambda, "partition-of-unity scale (default: radius 0.2 diameter)"))
        ->check(CLI::PositiveNumber);
    last(flow->add_option("--d", fa.d, "tangent dimension"))->check(kPositiveInt);
    last(flow->add_option("--record-every", fa.record_every, "snapshot interval"))->check(kPositiveInt);
    last(flow->add_option("--eta", fa.eta, "flatness proxy radius"))->check(CLI::PositiveNumber);

    SweepArgs sa;
    CLI::App* sweep = app.add_subcommand("dimsweep", "dimension estimation on GP manifolds");
    last(sweep->add_option("--dims", sa.dims, "intrinsic dimensions")->delimiter(','));
    last(sweep->add_option("--D", sa.D, "ambient dimension"))->check(kPositiveInt);
    last(sweep->add_option("--n", sa.n, "samples per manifold"))->check(CLI::Range(3, 100000000));
    last(sweep->add_option("--trials", sa.trials, "trials per dimension"))->check(kPositiveInt);
    last(sweep->add_option("--L-max", sa.L_max, "layer cap per run"))->check(CLI::NonNegativeNumber);
    last(sweep->add_option("--mle-k", sa.mle_k, "neighbours for the MLE estimator"))->check(CLI::Range(2, 1000000));

    // Config tokens go in front of the user's own so that TakeLast lets
    // flags win. Global keys precede the subcommand, the rest follow it.
    std::vector<std::string> argv_tokens{"flatnet"};
    try {
        std::string config_path;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
            if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
        }
        std::vector<std::string> global_cfg, sub_cfg;
        if (!config_path.empty()) {
            for (const auto& [k, v] : read_config(config_path)) {
                (is_global_key(k) ? global_cfg : sub_cfg).push_back("--" + k + "=" + v);
            }
        }
        std::size_t sub_pos = args.size();
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (app.get_subcommand_no_throw(args[i]) != nullptr) {
                sub_pos = i;
                break;
            }
        }
        argv_tokens.insert(argv_tokens.end(), global_cfg.begin(), global_cfg.end());
        argv_tokens.insert(argv_tokens.end(), args.begin(), args.begin() + static_cast<long>(std::min(sub_pos + 1, args.size())));
        if (sub_pos < args.size()) argv_tokens.insert(argv_tokens.end(), sub_cfg.begin(), sub_cfg.end());
        if (sub_pos < args.size()) argv_tokens.insert(argv_tokens.end(), args.begin() + static_cast<long>(sub_pos + 1), args.end());
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    }

    std::vector<const char*> cargv;
    for (const auto& t : argv_tokens) cargv.push_back(t.c_str());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kUsage);
    }

    try {
        KeyValues kv;
        collect(app, kv);
        CLI::App* sub = app.get_subcommands().front();
        collect(*sub, kv);
        const std::string name = sub->get_name();
        if (name == "gen") cmd_gen(ga, g, kv, out);
        else if (name == "train") cmd_train(ta, g, kv, out, err);
        else if (name == "eval") cmd_eval(ea, g, kv, out);
        else if (name == "flow") cmd_flow(fa, g, kv, out);
        else cmd_dimsweep(sa, g, kv, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kData);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kNumerical);
    }
    return 0;
}

}  // namespace flatnet
