#pragma once

#include "vfm/datamodel.hpp"
#include "vfm/losses.hpp"
#include "vfm/network.hpp"
#include "vfm/textio.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace vfm {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-3;
    int batch_wells = 8;
    int max_epochs = 60;
    int patience = 15;
    double grad_clip_norm = 1.0;
    double min_improvement = 1e-6;
    std::uint64_t seed = 42;

    void validate() const;
    KeyValueMap to_key_values() const;
    static TrainConfig from_key_values(const KeyValueMap& kv, TrainConfig base);
    static TrainConfig from_key_values(const KeyValueMap& kv) { return from_key_values(kv, TrainConfig()); }
};

/// lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi epoch / max_epochs)).
double cosine_lr(int epoch, int max_epochs, double lr_max, double lr_min = 0.0);

/// Rescales the gradients so their global L2 norm is at most max_norm. Returns the norm before clipping.
/// Throws TrainingError on a non-finite gradient.
double clip_gradients(std::span<Mat> grads, double max_norm);
double clip_gradients(const ParamList& params, double max_norm);

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Mat> m, v;
    long long step = 0;
};

/// Decoupled decay w -= lr*wd*w, then the bias-corrected Adam step.
void adamw_step(std::span<Mat> weights, std::span<const Mat> grads, AdamState& state, double lr, double wd,
                AdamHyper h = {});
void adamw_step(const ParamList& params, AdamState& state, double lr, double wd, AdamHyper h = {});

/// Stops once more than `patience` epochs in a row failed to improve the best value by min_improvement.
class EarlyStopping {
public:
    EarlyStopping(int patience, double min_improvement) : patience_(patience), min_improvement_(min_improvement) {}

    /// Records one epoch. Returns true when training should stop.
    bool update(double value);
    bool improved() const { return improved_; }
    int best_epoch() const { return best_epoch_; }
    double best_value() const { return best_; }

private:
    int patience_;
    double min_improvement_;
    int epoch_ = -1;
    int best_epoch_ = -1;
    int stale_ = 0;
    bool improved_ = false;
    double best_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    LossBreakdown train;
    LossBreakdown val;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    std::string stop_reason;

    bool operator==(const TrainHistory& o) const;
};

/// `epoch=... train_total=... val_total=... l_vfm=... l_pres=... l_reg=... l_phys=... lr=...`
std::string format_epoch_line(const EpochRecord& e);

struct PreparedWell {
    ModelInput input;
    WellTargets targets;
};

std::vector<PreparedWell> prepare_wells(std::span<const WellRecord> records, const NormStats& stats);

LossFlags loss_flags_for(const ModelConfig& cfg);

/// Evaluation-mode loss pooled over all time steps of the given wells.
LossBreakdown evaluate_loss(Model& model, const std::vector<PreparedWell>& wells, const NormStats& stats,
                            const LossWeights& w);

/// Throws TrainingError unless `stats` equals statistics refitted on `train` alone and differs from a fit
/// on train plus val.
void check_no_leakage(const NormStats& stats, std::span<const WellRecord> train, std::span<const WellRecord> val);

/// Trains in place and leaves the weights of the best validation epoch in `model`.
TrainHistory fit(Model& model, std::span<const WellRecord> train, std::span<const WellRecord> val,
                 const NormStats& stats, const TrainConfig& cfg, const LossWeights& w, std::ostream* log = nullptr);

} // namespace vfm
