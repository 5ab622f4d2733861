#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flatnet/cli.hpp"
#include "flatnet/datasets.hpp"
#include "support.hpp"

using namespace flatnet;
using namespace flatnet::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string str(const fs::path& p) { return p.string(); }

}  // namespace

TEST_CASE("gen writes the dataset, its coordinates and the resolved config") {
    const auto dir = temp_dir("cli_gen");
    REQUIRE(run({"--seed", "4", "--out", str(dir), "gen", "sine", "--name", "sine", "--n", "30"}).code == 0);
    const PointCloud pc = load_csv(dir / "sine.csv");
    CHECK(pc.size() == 30);
    CHECK(pc.dim() == 2);
    REQUIRE(pc.coords);
    CHECK(pc.coords->rows() == 1);
    CHECK(fs::exists(dir / "resolved_config.txt"));
    CHECK(read_file(dir / "resolved_config.txt").find("seed") != std::string::npos);

    CHECK(run({"--out", str(dir), "gen", "torus"}).code == 1);
    CHECK(run({"--out", str(dir), "gen", "circle", "--name", "circle", "--arc", "1.5"}).code == 1);
}

TEST_CASE("usage errors and missing files") {
    const auto dir = temp_dir("cli_errors");
    CHECK(run({}).code == 1);
    CHECK(run({"--help"}).code == 0);

    const fs::path out = dir / "never";
    const Run missing = run({"--out", str(out), "train", "--data", str(dir / "nope.csv")});
    CHECK(missing.code == 2);
    CHECK_FALSE(missing.err.empty());
    CHECK_FALSE(fs::exists(out));

    REQUIRE(run({"--out", str(dir), "gen", "circle", "--name", "circle", "--n", "40"}).code == 0);
    CHECK(run({"--out", str(dir / "s"), "dimsweep", "--trials", "0"}).code == 1);
    CHECK(run({"--out", str(dir / "f"), "flow", "--data", str(dir / "circle.csv"), "--steps", "0"}).code == 1);
    CHECK(run({"--out", str(dir / "f"), "flow", "--data", str(dir / "circle.csv"), "--h", "2"}).code == 1);
}

TEST_CASE("train and eval on the sine example") {
    const auto dir = temp_dir("cli_sine");
    REQUIRE(run({"--seed", "3", "--out", str(dir), "gen", "sine", "--name", "sine", "--n", "50", "--noise", "0.05"}).code == 0);
    const fs::path model_dir = dir / "model";
    REQUIRE(run({"--seed", "3", "--out", str(model_dir), "train", "--data", str(dir / "sine.csv")}).code == 0);
    CHECK(fs::exists(model_dir / "model.json"));
    const std::string log = read_file(model_dir / "training_log.csv");
    CHECK(log.rfind("iteration,layer,accepted", 0) == 0);

    const fs::path eval_dir = dir / "eval";
    REQUIRE(run({"--out", str(eval_dir), "eval", "--model", str(model_dir / "model.json"), "--data", str(dir / "sine.csv"),
                 "--edm", "--interp", "20"})
                .code == 0);
    const auto report = nlohmann::json::parse(read_file(eval_dir / "report.json"));
    CHECK(report["dim_estimates"]["flatnet"] == 1);
    CHECK(report["edm_ratio_stats"]["max"].get<double>() > 0.0);
    CHECK(fs::exists(eval_dir / "edm.csv"));
    CHECK(fs::exists(eval_dir / "edm.svg"));
    const std::string svg = read_file(eval_dir / "scatter.svg");
    for (const char* group : {"data", "features", "reconstructions"}) CHECK(svg.find(group) != std::string::npos);

    // eval without writing plots
    const fs::path quiet = dir / "quiet";
    REQUIRE(run({"--out", str(quiet), "eval", "--model", str(model_dir / "model.json"), "--data", str(dir / "sine.csv"),
                 "--no-plot"})
                .code == 0);
    CHECK_FALSE(fs::exists(quiet / "scatter.svg"));

    // dimension mismatch
    REQUIRE(run({"--out", str(dir), "gen", "swissroll", "--name", "swissroll", "--n", "60"}).code == 0);
    CHECK(run({"--out", str(dir / "bad"), "eval", "--model", str(model_dir / "model.json"), "--data",
               str(dir / "swissroll.csv")})
              .code == 2);
}

TEST_CASE("eval: --edm needs coordinates; a zero-layer model reconstructs exactly") {
    const auto dir = temp_dir("cli_zero");
    REQUIRE(run({"--out", str(dir), "gen", "circle", "--name", "circle", "--n", "30"}).code == 0);
    const fs::path model_dir = dir / "model";
    REQUIRE(run({"--out", str(model_dir), "train", "--data", str(dir / "circle.csv"), "--L-max", "0"}).code == 0);
    const fs::path eval_dir = dir / "eval";
    REQUIRE(run({"--out", str(eval_dir), "eval", "--model", str(model_dir / "model.json"), "--data",
                 str(dir / "circle.csv")})
                .code == 0);
    const auto report = nlohmann::json::parse(read_file(eval_dir / "report.json"));
    CHECK(report["recon_error"].get<double>() == 0.0);
    CHECK(report["dim_estimates"]["flatnet"].is_null());

    fs::remove(coords_path_for(dir / "circle.csv"));
    const Run edm = run({"--out", str(dir / "edm"), "eval", "--model", str(model_dir / "model.json"), "--data",
                         str(dir / "circle.csv"), "--edm"});
    CHECK(edm.code == 2);
    CHECK(edm.err.find("coords") != std::string::npos);
}

TEST_CASE("flow: h = 0 leaves every snapshot equal to the input") {
    const auto dir = temp_dir("cli_flow");
    REQUIRE(run({"--out", str(dir), "gen", "circle", "--name", "circle", "--n", "40", "--arc", "0.75"}).code == 0);
    const fs::path out = dir / "flow";
    REQUIRE(run({"--out", str(out), "flow", "--data", str(dir / "circle.csv"), "--steps", "4", "--h", "0",
                 "--record-every", "2"})
                .code == 0);
    const Matrix input = load_csv(dir / "circle.csv").X;
    int snapshots = 0;
    for (const auto& entry : fs::directory_iterator(out)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("snapshot_", 0) != 0) continue;
        ++snapshots;
        const Matrix snap = load_matrix_csv(entry.path());
        CHECK((snap.rows() == input.rows() ? snap : Matrix(snap.transpose())) == input);
    }
    CHECK(snapshots == 3);
    CHECK(fs::exists(out / "proxy.csv"));
}

TEST_CASE("determinism and config precedence") {
    const auto dir = temp_dir("cli_det");
    REQUIRE(run({"--seed", "5", "--out", str(dir), "gen", "sine", "--name", "sine", "--n", "40"}).code == 0);
    const std::string data = str(dir / "sine.csv");
    REQUIRE(run({"--seed", "8", "--out", str(dir / "a"), "train", "--data", data, "--L-max", "6"}).code == 0);
    REQUIRE(run({"--seed", "8", "--out", str(dir / "b"), "train", "--data", data, "--L-max", "6"}).code == 0);
    CHECK(read_file(dir / "a" / "model.json") == read_file(dir / "b" / "model.json"));

    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "# test config\nseed=8\nL_max=2\n";
    }
    REQUIRE(run({"--config", str(dir / "run.cfg"), "--out", str(dir / "c"), "train", "--data", data, "--L-max", "6"})
                .code == 0);
    CHECK(read_file(dir / "c" / "model.json") == read_file(dir / "a" / "model.json"));
    const std::string resolved = read_file(dir / "c" / "resolved_config.txt");
    CHECK(resolved.find("L-max=6") != std::string::npos);

    std::ofstream(dir / "broken.cfg") << "this line has no equals sign\n";
    CHECK(run({"--config", str(dir / "broken.cfg"), "--out", str(dir / "d"), "gen", "sine", "--name", "sine"}).code == 1);
}
