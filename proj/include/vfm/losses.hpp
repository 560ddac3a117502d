#pragma once

#include "vfm/datamodel.hpp"
#include "vfm/network.hpp"
#include "vfm/textio.hpp"

#include <array>
#include <span>
#include <vector>

namespace vfm {

struct LossWeights {
    double alpha_vfm = 1.0;
    double alpha_pres = 1.0;
    double beta_reg = 2.0;
    double delta = 0.5;
    double focal_gamma = 2.0;

    void validate() const;
    KeyValueMap to_key_values() const;
    static LossWeights from_key_values(const KeyValueMap& kv, LossWeights base);
    static LossWeights from_key_values(const KeyValueMap& kv) { return from_key_values(kv, LossWeights()); }
};

struct LossFlags {
    bool use_regime = true;
    bool use_physics = true;
};

/// Mean squared error over all entries. `grad`, when given, receives dL/dpred.
double mse_loss(const Mat& pred, const Mat& target, Mat* grad = nullptr);
inline double vfm_loss(const Mat& pred, const Mat& target, Mat* grad = nullptr) { return mse_loss(pred, target, grad); }

/// Mean over rows of -(1 - p_t)^gamma log p_t, softmax in log-sum-exp form.
/// Throws DataError for labels outside {0,1,2}, TrainingError for non-finite logits.
double focal_loss(const Mat& logits, std::span<const int> labels, double gamma, Mat* grad = nullptr);

/// sum_j (1/sigma2_j) mean_t ReLU(-w_j)^2 over the three phase columns (original units).
double nonneg_penalty(const Mat& flows, const std::array<double, 3>& sigma2, Mat* grad = nullptr);

/// (1/sigma2) mean ReLU(bound - pred)^2. Gradient with respect to pred.
double order_penalty(const Vec& pred, const Vec& bound, double sigma2, Vec* grad = nullptr);
inline double pressure_order_penalty(const Vec& pbh_pred, const Vec& pwh, double sigma2, Vec* grad = nullptr) {
    return order_penalty(pbh_pred, pwh, sigma2, grad);
}
inline double temp_order_penalty(const Vec& tbh_pred, const Vec& twh, double sigma2, Vec* grad = nullptr) {
    return order_penalty(tbh_pred, twh, sigma2, grad);
}

struct LossParts {
    double vfm = 0.0;
    double pres = 0.0;
    double reg_bh = 0.0;
    double reg_wh = 0.0;
    double nonneg = 0.0;
    double pres_order = 0.0;
    double temp_order = 0.0;

    double physics() const { return nonneg + pres_order + temp_order; }
    void add_scaled(const LossParts& o, double w);
};

struct LossBreakdown {
    double total = 0.0;
    double vfm = 0.0;
    double pres = 0.0;
    double reg = 0.0;  // L_reg,bh + L_reg,wh
    double phys = 0.0; // nonneg + pressure order + temperature order
};

/// Weighted total; disabled terms contribute exactly 0.
LossBreakdown total_loss(const LossParts& parts, const LossWeights& w, LossFlags flags);

/// Training targets of one well: z-scored regression targets, labels and the measured wellhead values.
struct WellTargets {
    Mat flows_norm;      // [T, 3]
    Mat bottomhole_norm; // [T, 2]
    std::vector<int> regime_bh, regime_wh;
    Vec pwh, twh;
};

WellTargets make_well_targets(const WellRecord& record, const NormStats& stats);

/// Loss terms of one well. When `grads` is given it receives d(scale * total)/d(outputs).
LossParts well_loss(const PredictionSequence& pred, const WellTargets& target, const NormStats& stats,
                    const LossWeights& w, LossFlags flags, double scale = 1.0, OutputGrads* grads = nullptr);

} // namespace vfm
