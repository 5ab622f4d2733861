#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flatnet/datasets.hpp"
#include "flatnet/layer.hpp"
#include "flatnet/local_model.hpp"

namespace flatnet {

// One construction iteration. Rejected iterations keep the fields that were
// computed before the rejection and leave the rest at zero.
struct LayerRecord {
    int iteration = 0;
    int x0_index = 0;
    int d_hat = 0;
    double lambda = 0.0;
    double alpha = 0.0;
    double ell = 0.0;   // recon loss at the selected lambda
    double loss = 0.0;  // recon loss at lambda0 for d_hat
    double proxy = 0.0;  // flatness proxy of the working data after this iteration
    bool accepted = false;
    std::string note;
};

struct PcaHead {
    Matrix U;  // D x d, orthonormal
    Vector z0;
};

class FlatNetModel {
public:
    int D = 0;
    std::vector<FlatLayer> layers;
    std::optional<PcaHead> head;
    Hyperparams hp;
    std::vector<LayerRecord> log;
    std::vector<std::string> warnings;
};

struct LayerFit {
    std::optional<FlatLayer> layer;
    LayerRecord record;  // iteration, x0_index and proxy are left to the caller
};

// Fits one layer at base point x0 of the working data. Rejects (layer empty,
// record.note says why) when no dimension meets eps_dim, when d_hat == D,
// or when the selected fit is degenerate.
LayerFit fit_layer(const Matrix& z, const Vector& x0, const Hyperparams& hp, int d_start);

using ProgressFn = std::function<void(const LayerRecord&)>;

// Greedy layer-wise construction. Stops after hp.L_max accepted layers or
// after hp.halt.patience consecutive iterations in which the flatness proxy
// of the working data improved on its best value by less than
// flat_tol * N * diameter(X). Rejected iterations count toward patience.
// The proxy uses the running mode of the accepted d_hat values.
FlatNetModel construct(const PointCloud& pc, const Hyperparams& hp, std::uint64_t seed,
                       const ProgressFn& progress = {});

Matrix flatten(const FlatNetModel& model, const Matrix& x);
Matrix reconstruct(const FlatNetModel& model, const Matrix& z);

// Most frequent d_hat among accepted layers, ties toward the smaller value.
int global_dimension(const FlatNetModel& model);

// PCA of the flattened data. d defaults to global_dimension(model); a model
// without layers needs it given explicitly.
void fit_head(FlatNetModel& model, const Matrix& x, std::optional<int> d = std::nullopt);

Matrix encode(const FlatNetModel& model, const Matrix& x);
Matrix decode(const FlatNetModel& model, const Matrix& codes);
Vector encode(const FlatNetModel& model, const Vector& x);
Vector decode(const FlatNetModel& model, const Vector& code);

inline constexpr int kModelVersion = 1;

std::string model_to_json(const FlatNetModel& model);
FlatNetModel model_from_json(const std::string& text);
void save_model(const FlatNetModel& model, const std::filesystem::path& path);
FlatNetModel load_model(const std::filesystem::path& path);

}  // namespace flatnet
