#include "vfm/losses.hpp"

#include "vfm/errors.hpp"

#include <cmath>

namespace vfm {

void LossWeights::validate() const {
    for (double v : {alpha_vfm, alpha_pres, beta_reg, delta, focal_gamma}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
    }
}

KeyValueMap LossWeights::to_key_values() const {
    return {{"alpha_vfm", format_double(alpha_vfm)},
            {"alpha_pres", format_double(alpha_pres)},
            {"beta_reg", format_double(beta_reg)},
            {"delta", format_double(delta)},
            {"focal_gamma", format_double(focal_gamma)}};
}

LossWeights LossWeights::from_key_values(const KeyValueMap& kv, LossWeights w) {
    auto read = [&](const char* key, double& dst) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        try {
            dst = parse_double(it->second);
        } catch (const DataError&) {
            throw ConfigError(std::string(key) + ": not a number: '" + it->second + "'");
        }
    };
    read("alpha_vfm", w.alpha_vfm);
    read("alpha_pres", w.alpha_pres);
    read("beta_reg", w.beta_reg);
    read("delta", w.delta);
    read("focal_gamma", w.focal_gamma);
    w.validate();
    return w;
}

double mse_loss(const Mat& pred, const Mat& target, Mat* grad) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("mse: shape mismatch");
    const double n = static_cast<double>(pred.size());
    if (n == 0) throw ShapeError("mse: empty input");
    const Mat diff = pred - target;
    if (grad) *grad = diff * (2.0 / n);
    return diff.squaredNorm() / n;
}

double focal_loss(const Mat& logits, std::span<const int> labels, double gamma, Mat* grad) {
    const Eigen::Index T = logits.rows();
    if (static_cast<std::size_t>(T) != labels.size()) throw ShapeError("focal: label count does not match logits");
    if (T == 0) throw ShapeError("focal: empty input");
    if (!logits.allFinite()) throw TrainingError("focal: non-finite logits");
    if (grad) grad->setZero(T, logits.cols());
    double sum = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        const int y = labels[static_cast<std::size_t>(t)];
        if (y < 0 || y >= logits.cols()) throw DataError("focal: label " + std::to_string(y) + " out of range");
        const double m = logits.row(t).maxCoeff();
        const double lse = m + std::log((logits.row(t).array() - m).exp().sum());
        const double logp = logits(t, y) - lse;
        const double p = std::exp(logp);
        const double one_minus = -std::expm1(logp);
        const double mod = std::pow(one_minus, gamma);
        sum += -mod * logp;
        if (grad) {
            double dlogp = -mod;
            if (gamma > 0.0 && one_minus > 0.0) dlogp += gamma * std::pow(one_minus, gamma - 1.0) * p * logp;
            for (Eigen::Index j = 0; j < logits.cols(); ++j) {
                const double pj = std::exp(logits(t, j) - lse);
                (*grad)(t, j) = dlogp * ((j == y ? 1.0 : 0.0) - pj) / static_cast<double>(T);
            }
        }
    }
    return sum / static_cast<double>(T);
}

double nonneg_penalty(const Mat& flows, const std::array<double, 3>& sigma2, Mat* grad) {
    if (flows.cols() != 3) throw ShapeError("nonneg: expected three phase columns");
    const Eigen::Index T = flows.rows();
    if (T == 0) throw ShapeError("nonneg: empty input");
    if (grad) grad->setZero(T, 3);
    double total = 0.0;
    for (Eigen::Index j = 0; j < 3; ++j) {
        const double s2 = sigma2[static_cast<std::size_t>(j)];
        if (!(s2 > 0.0)) throw ConfigError("nonneg: variance must be positive");
        double acc = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
            const double v = flows(t, j);
            if (v < 0.0) {
                acc += v * v;
                if (grad) (*grad)(t, j) = 2.0 * v / (s2 * static_cast<double>(T));
            }
        }
        total += acc / static_cast<double>(T) / s2;
    }
    return total;
}

double order_penalty(const Vec& pred, const Vec& bound, double sigma2, Vec* grad) {
    if (pred.size() != bound.size()) throw ShapeError("order penalty: length mismatch");
    const Eigen::Index T = pred.size();
    if (T == 0) throw ShapeError("order penalty: empty input");
    if (!(sigma2 > 0.0)) throw ConfigError("order penalty: variance must be positive");
    if (grad) grad->setZero(T);
    double acc = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        const double gap = bound(t) - pred(t);
        if (gap > 0.0) {
            acc += gap * gap;
            if (grad) (*grad)(t) = -2.0 * gap / (sigma2 * static_cast<double>(T));
        }
    }
    return acc / static_cast<double>(T) / sigma2;
}

void LossParts::add_scaled(const LossParts& o, double w) {
    vfm += w * o.vfm;
    pres += w * o.pres;
    reg_bh += w * o.reg_bh;
    reg_wh += w * o.reg_wh;
    nonneg += w * o.nonneg;
    pres_order += w * o.pres_order;
    temp_order += w * o.temp_order;
}

LossBreakdown total_loss(const LossParts& parts, const LossWeights& w, LossFlags flags) {
    LossBreakdown b;
    b.vfm = parts.vfm;
    b.pres = parts.pres;
    b.reg = flags.use_regime ? parts.reg_bh + parts.reg_wh : 0.0;
    b.phys = flags.use_physics ? parts.physics() : 0.0;
    b.total = w.alpha_vfm * b.vfm + w.alpha_pres * b.pres;
    if (flags.use_regime) b.total += w.beta_reg * b.reg;
    if (flags.use_physics) b.total += w.delta * b.phys;
    return b;
}

WellTargets make_well_targets(const WellRecord& record, const NormStats& stats) {
    stats.require_fitted();
    const auto T = static_cast<Eigen::Index>(record.steps());
    WellTargets wt;
    wt.flows_norm.resize(T, 3);
    wt.bottomhole_norm.resize(T, 2);
    wt.pwh.resize(T);
    wt.twh.resize(T);
    wt.regime_bh.resize(static_cast<std::size_t>(T));
    wt.regime_wh.resize(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const TargetRow& r = record.targets[i];
        for (std::size_t j = 0; j < 3; ++j) {
            wt.flows_norm(t, static_cast<Eigen::Index>(j)) = zscore(r.get(static_cast<TargetField>(j)), stats.targets[j]);
        }
        wt.bottomhole_norm(t, 0) = zscore(r.pbh, stats.targets[static_cast<std::size_t>(TargetField::pbh)]);
        wt.bottomhole_norm(t, 1) = zscore(r.tbh, stats.targets[static_cast<std::size_t>(TargetField::tbh)]);
        wt.regime_bh[i] = r.frbh;
        wt.regime_wh[i] = r.frwh;
        wt.pwh(t) = record.ops[i].pwh;
        wt.twh(t) = record.ops[i].twh;
    }
    return wt;
}

LossParts well_loss(const PredictionSequence& pred, const WellTargets& target, const NormStats& stats,
                    const LossWeights& w, LossFlags flags, double scale, OutputGrads* grads) {
    LossParts parts;
    Mat g_flows, g_bh;
    parts.vfm = mse_loss(pred.flows_norm, target.flows_norm, grads ? &g_flows : nullptr);
    parts.pres = mse_loss(pred.bottomhole_norm, target.bottomhole_norm, grads ? &g_bh : nullptr);
    if (grads) {
        grads->flows = (scale * w.alpha_vfm) * g_flows;
        grads->bottomhole = (scale * w.alpha_pres) * g_bh;
        grads->regime_bh.resize(0, 0);
        grads->regime_wh.resize(0, 0);
    }
    if (flags.use_regime) {
        if (!pred.has_regime()) throw ConfigError("regime loss requested but the model has no regime head");
        Mat g_rb, g_rw;
        parts.reg_bh = focal_loss(pred.regime_bh, target.regime_bh, w.focal_gamma, grads ? &g_rb : nullptr);
        parts.reg_wh = focal_loss(pred.regime_wh, target.regime_wh, w.focal_gamma, grads ? &g_rw : nullptr);
        if (grads) {
            grads->regime_bh = (scale * w.beta_reg) * g_rb;
            grads->regime_wh = (scale * w.beta_reg) * g_rw;
        }
    }
    if (flags.use_physics) {
        const std::array<double, 3> s2 = {stats.target_variance(TargetField::woil),
                                          stats.target_variance(TargetField::wwat),
                                          stats.target_variance(TargetField::wgas)};
        Mat g_nn;
        Vec g_p, g_t;
        parts.nonneg = nonneg_penalty(pred.flows, s2, grads ? &g_nn : nullptr);
        parts.pres_order =
            pressure_order_penalty(pred.pbh, target.pwh, stats.target_variance(TargetField::pbh), grads ? &g_p : nullptr);
        parts.temp_order =
            temp_order_penalty(pred.tbh, target.twh, stats.target_variance(TargetField::tbh), grads ? &g_t : nullptr);
        if (grads) {
            const double k = scale * w.delta;
            for (Eigen::Index j = 0; j < 3; ++j) {
                grads->flows.col(j) += (k * stats.targets[static_cast<std::size_t>(j)].std) * g_nn.col(j);
            }
            grads->bottomhole.col(0) += (k * stats.targets[static_cast<std::size_t>(TargetField::pbh)].std) * g_p;
            grads->bottomhole.col(1) += (k * stats.targets[static_cast<std::size_t>(TargetField::tbh)].std) * g_t;
        }
    }
    return parts;
}

} // namespace vfm
