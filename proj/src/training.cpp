#include "vfm/training.hpp"

#include "vfm/errors.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace vfm {

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !(weight_decay >= 0.0) || !(grad_clip_norm > 0.0) || !(min_improvement >= 0.0)) {
        throw ConfigError("learning rate and clip norm must be positive; weight decay and threshold >= 0");
    }
    if (batch_wells < 1) throw ConfigError("batch_wells must be >= 1");
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs > 0 && patience >= max_epochs) throw ConfigError("patience must be < max_epochs");
}

KeyValueMap TrainConfig::to_key_values() const {
    return {{"lr", format_double(lr)},
            {"weight_decay", format_double(weight_decay)},
            {"batch_wells", std::to_string(batch_wells)},
            {"max_epochs", std::to_string(max_epochs)},
            {"patience", std::to_string(patience)},
            {"grad_clip_norm", format_double(grad_clip_norm)},
            {"min_improvement", format_double(min_improvement)},
            {"train_seed", std::to_string(seed)}};
}

TrainConfig TrainConfig::from_key_values(const KeyValueMap& kv, TrainConfig c) {
    auto num = [&](const char* key, double& dst) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        try {
            dst = parse_double(it->second);
        } catch (const DataError&) {
            throw ConfigError(std::string(key) + ": not a number: '" + it->second + "'");
        }
    };
    auto integer = [&](const char* key, int& dst) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        try {
            dst = static_cast<int>(parse_int(it->second));
        } catch (const DataError&) {
            throw ConfigError(std::string(key) + ": not an integer: '" + it->second + "'");
        }
    };
    num("lr", c.lr);
    num("weight_decay", c.weight_decay);
    integer("batch_wells", c.batch_wells);
    integer("max_epochs", c.max_epochs);
    integer("patience", c.patience);
    num("grad_clip_norm", c.grad_clip_norm);
    num("min_improvement", c.min_improvement);
    if (auto it = kv.find("train_seed"); it != kv.end()) c.seed = parse_seed(it->second);
    return c;
}

double cosine_lr(int epoch, int max_epochs, double lr_max, double lr_min) {
    if (max_epochs <= 0) return lr_max;
    const double x = static_cast<double>(epoch) / static_cast<double>(max_epochs);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * x));
}

double clip_gradients(std::span<Mat> grads, double max_norm) {
    double sq = 0.0;
    for (const Mat& g : grads) sq += g.squaredNorm();
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm");
    if (norm > max_norm) {
        const double f = max_norm / norm;
        for (Mat& g : grads) g *= f;
    }
    return norm;
}

double clip_gradients(const ParamList& params, double max_norm) {
    double sq = 0.0;
    for (const Param* p : params) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm");
    if (norm > max_norm) {
        const double f = max_norm / norm;
        for (Param* p : params) p->grad *= f;
    }
    return norm;
}

namespace {

void adam_update(Mat& w, const Mat& g, Mat& m, Mat& v, double lr, double wd, const AdamHyper& h, double bc1,
                 double bc2) {
    if (wd != 0.0) w -= (lr * wd) * w;
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + h.eps);
}

} // namespace

void adamw_step(std::span<Mat> weights, std::span<const Mat> grads, AdamState& s, double lr, double wd, AdamHyper h) {
    if (weights.size() != grads.size()) throw ShapeError("adamw: weight/gradient count mismatch");
    if (s.m.size() != weights.size()) {
        s.m.clear();
        s.v.clear();
        for (const Mat& w : weights) {
            s.m.push_back(Mat::Zero(w.rows(), w.cols()));
            s.v.push_back(Mat::Zero(w.rows(), w.cols()));
        }
        s.step = 0;
    }
    ++s.step;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < weights.size(); ++i) adam_update(weights[i], grads[i], s.m[i], s.v[i], lr, wd, h, bc1, bc2);
}

void adamw_step(const ParamList& params, AdamState& s, double lr, double wd, AdamHyper h) {
    if (s.m.size() != params.size()) {
        s.m.clear();
        s.v.clear();
        for (const Param* p : params) {
            s.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
            s.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        }
        s.step = 0;
    }
    ++s.step;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_update(params[i]->value, params[i]->grad, s.m[i], s.v[i], lr, wd, h, bc1, bc2);
    }
}

bool EarlyStopping::update(double value) {
    ++epoch_;
    improved_ = value <= best_ - min_improvement_ || (best_epoch_ < 0 && std::isfinite(value));
    if (improved_) {
        best_ = value;
        best_epoch_ = epoch_;
        stale_ = 0;
        return false;
    }
    ++stale_;
    return stale_ > patience_;
}

bool TrainHistory::operator==(const TrainHistory& o) const {
    if (best_epoch != o.best_epoch || best_val != o.best_val || stop_reason != o.stop_reason) return false;
    if (epochs.size() != o.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& a = epochs[i];
        const auto& b = o.epochs[i];
        if (a.epoch != b.epoch || a.lr != b.lr || a.train.total != b.train.total || a.val.total != b.val.total ||
            a.val.vfm != b.val.vfm || a.val.pres != b.val.pres || a.val.reg != b.val.reg || a.val.phys != b.val.phys) {
            return false;
        }
    }
    return true;
}

std::string format_epoch_line(const EpochRecord& e) {
    return "epoch=" + std::to_string(e.epoch) + " train_total=" + format_double(e.train.total) +
           " val_total=" + format_double(e.val.total) + " l_vfm=" + format_double(e.train.vfm) +
           " l_pres=" + format_double(e.train.pres) + " l_reg=" + format_double(e.train.reg) +
           " l_phys=" + format_double(e.train.phys) + " lr=" + format_double(e.lr);
}

std::vector<PreparedWell> prepare_wells(std::span<const WellRecord> records, const NormStats& stats) {
    std::vector<PreparedWell> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({make_model_input(r, stats), make_well_targets(r, stats)});
    return out;
}

LossFlags loss_flags_for(const ModelConfig& cfg) { return {cfg.use_regime, cfg.use_physics}; }

namespace {

double total_steps(const std::vector<PreparedWell>& wells, std::span<const std::size_t> idx) {
    double n = 0.0;
    for (std::size_t i : idx) n += static_cast<double>(wells[i].input.ops.rows());
    return n;
}

std::string describe(const LossParts& p) {
    return "vfm=" + format_double(p.vfm) + " pres=" + format_double(p.pres) + " reg_bh=" + format_double(p.reg_bh) +
           " reg_wh=" + format_double(p.reg_wh) + " nonneg=" + format_double(p.nonneg) +
           " pres_order=" + format_double(p.pres_order) + " temp_order=" + format_double(p.temp_order);
}

} // namespace

LossBreakdown evaluate_loss(Model& model, const std::vector<PreparedWell>& wells, const NormStats& stats,
                            const LossWeights& w) {
    const LossFlags flags = loss_flags_for(model.config());
    LossParts pooled;
    double n = 0.0;
    for (const auto& pw : wells) n += static_cast<double>(pw.input.ops.rows());
    for (const auto& pw : wells) {
        const PredictionSequence pred = model.forward(pw.input, stats, false, nullptr);
        pooled.add_scaled(well_loss(pred, pw.targets, stats, w, flags), static_cast<double>(pred.steps()) / n);
    }
    return total_loss(pooled, w, flags);
}

void check_no_leakage(const NormStats& stats, std::span<const WellRecord> train, std::span<const WellRecord> val) {
    if (!(fit_norm_stats(train) == stats)) {
        throw TrainingError("normalisation statistics were not fitted on the training split alone");
    }
    if (val.empty()) return;
    std::vector<WellRecord> merged(train.begin(), train.end());
    merged.insert(merged.end(), val.begin(), val.end());
    if (fit_norm_stats(merged) == stats) {
        throw TrainingError("statistics fitted on train+val equal the training statistics; leakage guard is vacuous");
    }
}

TrainHistory fit(Model& model, std::span<const WellRecord> train, std::span<const WellRecord> val,
                 const NormStats& stats, const TrainConfig& cfg, const LossWeights& w, std::ostream* log) {
    cfg.validate();
    w.validate();
    stats.require_fitted();
    TrainHistory hist;
    if (cfg.max_epochs == 0) {
        hist.stop_reason = "no_epochs";
        return hist;
    }
    if (train.empty() || val.empty()) throw ConfigError("training needs non-empty train and validation splits");

    const auto train_wells = prepare_wells(train, stats);
    const auto val_wells = prepare_wells(val, stats);
    const LossFlags flags = loss_flags_for(model.config());
    const ParamList params = model.parameters();

    Rng order_rng(derive_seed(cfg.seed, 1));
    Rng dropout_rng(derive_seed(cfg.seed, 2));
    AdamState adam;
    EarlyStopping stopper(cfg.patience, cfg.min_improvement);
    std::vector<Mat> best_weights;
    for (const Param* p : params) best_weights.push_back(p->value);

    std::vector<std::size_t> order(train_wells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    hist.stop_reason = "max_epochs";
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.max_epochs, cfg.lr);
        order_rng.shuffle(order);
        LossParts epoch_parts;
        const double epoch_steps = total_steps(train_wells, order);

        const auto batch = static_cast<std::size_t>(cfg.batch_wells);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::span<const std::size_t> idx(order.data() + b0, std::min(batch, order.size() - b0));
            const double batch_steps = total_steps(train_wells, idx);
            zero_grad(params);
            for (std::size_t i : idx) {
                const PreparedWell& pw = train_wells[i];
                const double share = static_cast<double>(pw.input.ops.rows()) / batch_steps;
                const PredictionSequence pred = model.forward(pw.input, stats, true, &dropout_rng);
                OutputGrads g;
                const LossParts parts = well_loss(pred, pw.targets, stats, w, flags, share, &g);
                const LossBreakdown lb = total_loss(parts, w, flags);
                if (!std::isfinite(lb.total)) {
                    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", well " +
                                        train[i].well_id + ": " + describe(parts));
                }
                model.backward(g);
                epoch_parts.add_scaled(parts, static_cast<double>(pw.input.ops.rows()) / epoch_steps);
            }
            try {
                clip_gradients(params, cfg.grad_clip_norm);
            } catch (const TrainingError& e) {
                throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b0 / batch));
            }
            adamw_step(params, adam, lr, cfg.weight_decay);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train = total_loss(epoch_parts, w, flags);
        rec.val = evaluate_loss(model, val_wells, stats, w);
        if (!std::isfinite(rec.val.total)) {
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        }
        hist.epochs.push_back(rec);
        if (log) *log << format_epoch_line(rec) << '\n';

        const bool stop = stopper.update(rec.val.total);
        if (stopper.improved()) {
            for (std::size_t i = 0; i < params.size(); ++i) best_weights[i] = params[i]->value;
        }
        if (stop) {
            hist.stop_reason = "early_stop";
            break;
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_weights[i];
    hist.best_epoch = stopper.best_epoch();
    hist.best_val = stopper.best_value();
    return hist;
}

} // namespace vfm
