#pragma once

#include "vfm/datamodel.hpp"
#include "vfm/losses.hpp"
#include "vfm/network.hpp"
#include "vfm/training.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace vfm {

double rmse(std::span<const double> pred, std::span<const double> target);

struct MapeResult {
    double percent = 0.0; // nan when every point was excluded
    std::size_t used = 0;
    std::size_t excluded = 0; // |target| < floor
};

/// 100 * mean |p - t| / |t| over points with |t| >= floor.
MapeResult mape(std::span<const double> pred, std::span<const double> target, double floor = 0.1);

using ConfusionMatrix = std::array<std::array<long long, 3>, 3>; // [true][predicted]

/// Argmax of each row, ties resolved to the lowest class index.
std::vector<int> predicted_classes(const Mat& logits);
double regime_accuracy(const Mat& logits, std::span<const int> labels);
ConfusionMatrix confusion_matrix(const Mat& logits, std::span<const int> labels);
double accuracy_from_confusion(const ConfusionMatrix& m);

/// Mean |w_tot - (((oil + wat) + gas) + w_gl)|.
double mass_residual(const Mat& components, const Vec& w_gl, const Vec& w_tot);
double mass_residual(const PredictionSequence& pred);

struct ViolationCounts {
    long long negative_flow = 0;  // (point, phase) pairs with w < 0
    long long pressure_order = 0; // points with pbh <= pwh
    long long temp_order = 0;     // points with tbh <= twh

    ViolationCounts& operator+=(const ViolationCounts& o);
};

ViolationCounts physics_violations(const Mat& flows, const Vec& pbh, const Vec& tbh, const Vec& pwh, const Vec& twh);
ViolationCounts physics_violations(const PredictionSequence& pred, const OperationalSequence& ops);

struct Metrics {
    double rmse_wtot = 0, rmse_woil = 0, rmse_wwat = 0, rmse_wgas = 0, rmse_pbh = 0, rmse_tbh = 0;
    MapeResult mape_wtot;
    double mape_floor = 0.1;
    bool has_regime = false;
    double reg_bh = 0.0, reg_wh = 0.0;
    ConfusionMatrix confusion_bh{}, confusion_wh{};
    double mass_residual = 0.0;
    ViolationCounts violations;
    std::size_t n_wells = 0, n_points = 0;
};

/// True total flow of a record row: ((woil + wwat) + wgas) + w_gl.
double true_total_flow(const WellRecord& r, std::size_t t);

Metrics evaluate_model(Model& model, std::span<const WellRecord> records, const NormStats& stats,
                       double mape_floor = 0.1);

/// Long-format predicted-vs-true table: well_id,step,target,true,pred for WOIL, WWAT, WGAS, WTOT, PBH, TBH.
std::string scatter_csv(Model& model, std::span<const WellRecord> records, const NormStats& stats);

/// Single-row metric table for the eval subcommand.
std::string metrics_csv(const Metrics& m);

// ---------------------------------------------------------------------------
// Ablation harness

struct AblationCell {
    std::string name;
    Variant variant = Variant::film_crossattn;
    bool physics = true;
    bool regime = true;
};

/// Experiment 1: the three architectures with physics and regime on.
/// Experiment 2: film_crossattn with physics/regime on/off. Throws ConfigError otherwise.
std::vector<AblationCell> experiment_cells(int experiment);

struct AblationSettings {
    int experiment = 1;
    ModelConfig model;
    TrainConfig train;
    LossWeights weights;
    SplitFractions fractions;
    int strata_bins = 5;
    double mape_floor = 0.1;
    std::uint64_t seed = 42;
};

struct AblationRow {
    AblationCell cell;
    bool ok = false;
    std::string error;
    Metrics metrics;
    int best_epoch = -1;
    int epochs_run = 0;
    std::size_t parameters = 0;
};

struct AblationReport {
    AblationSettings settings;
    std::size_t n_wells = 0, steps = 0, n_train = 0, n_val = 0, n_test = 0;
    std::vector<AblationRow> rows;
};

/// Trains and evaluates every cell on one shared split and one set of training statistics.
AblationReport run_ablation(std::span<const WellRecord> records, const std::vector<AblationCell>& cells,
                            const AblationSettings& settings, std::ostream* progress = nullptr);

std::string ablation_csv(const AblationReport& report);

} // namespace vfm
