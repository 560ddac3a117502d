#include "vfm/evaluation.hpp"

#include "vfm/errors.hpp"
#include "vfm/textio.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace vfm {

double rmse(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw ShapeError("rmse: length mismatch");
    if (pred.empty()) throw ShapeError("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

MapeResult mape(std::span<const double> pred, std::span<const double> target, double floor) {
    if (pred.size() != target.size()) throw ShapeError("mape: length mismatch");
    if (pred.empty()) throw ShapeError("mape: empty input");
    MapeResult r;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double t = std::abs(target[i]);
        if (t < floor || t == 0.0) {
            ++r.excluded;
            continue;
        }
        acc += std::abs(pred[i] - target[i]) / t;
        ++r.used;
    }
    r.percent = r.used > 0 ? 100.0 * acc / static_cast<double>(r.used) : std::nan("");
    return r;
}

std::vector<int> predicted_classes(const Mat& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < logits.cols(); ++j) {
            if (logits(t, j) > logits(t, best)) best = j;
        }
        out[static_cast<std::size_t>(t)] = static_cast<int>(best);
    }
    return out;
}

ConfusionMatrix confusion_matrix(const Mat& logits, std::span<const int> labels) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw ShapeError("confusion: length mismatch");
    ConfusionMatrix m{};
    const auto pred = predicted_classes(logits);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y > 2) throw DataError("regime label " + std::to_string(y) + " out of range");
        ++m[static_cast<std::size_t>(y)][static_cast<std::size_t>(pred[i])];
    }
    return m;
}

double accuracy_from_confusion(const ConfusionMatrix& m) {
    long long total = 0, diag = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) total += m[i][j];
        diag += m[i][i];
    }
    if (total == 0) throw ShapeError("accuracy: empty input");
    return static_cast<double>(diag) / static_cast<double>(total);
}

double regime_accuracy(const Mat& logits, std::span<const int> labels) {
    return accuracy_from_confusion(confusion_matrix(logits, labels));
}

double mass_residual(const Mat& components, const Vec& w_gl, const Vec& w_tot) {
    if (components.cols() != 3 || components.rows() != w_gl.size() || w_gl.size() != w_tot.size()) {
        throw ShapeError("mass residual: shape mismatch");
    }
    if (w_tot.size() == 0) throw ShapeError("mass residual: empty input");
    double acc = 0.0;
    for (Eigen::Index t = 0; t < w_tot.size(); ++t) {
        acc += std::abs(w_tot(t) - (((components(t, 0) + components(t, 1)) + components(t, 2)) + w_gl(t)));
    }
    return acc / static_cast<double>(w_tot.size());
}

double mass_residual(const PredictionSequence& pred) { return mass_residual(pred.flows, pred.w_gl, pred.w_tot); }

ViolationCounts& ViolationCounts::operator+=(const ViolationCounts& o) {
    negative_flow += o.negative_flow;
    pressure_order += o.pressure_order;
    temp_order += o.temp_order;
    return *this;
}

ViolationCounts physics_violations(const Mat& flows, const Vec& pbh, const Vec& tbh, const Vec& pwh, const Vec& twh) {
    const Eigen::Index T = flows.rows();
    if (pbh.size() != T || tbh.size() != T || pwh.size() != T || twh.size() != T) {
        throw ShapeError("physics violations: length mismatch");
    }
    ViolationCounts c;
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index j = 0; j < flows.cols(); ++j) {
            if (flows(t, j) < 0.0) ++c.negative_flow;
        }
        if (pbh(t) <= pwh(t)) ++c.pressure_order;
        if (tbh(t) <= twh(t)) ++c.temp_order;
    }
    return c;
}

ViolationCounts physics_violations(const PredictionSequence& pred, const OperationalSequence& ops) {
    Vec pwh(static_cast<Eigen::Index>(ops.size())), twh(static_cast<Eigen::Index>(ops.size()));
    for (std::size_t t = 0; t < ops.size(); ++t) {
        pwh(static_cast<Eigen::Index>(t)) = ops[t].pwh;
        twh(static_cast<Eigen::Index>(t)) = ops[t].twh;
    }
    return physics_violations(pred.flows, pred.pbh, pred.tbh, pwh, twh);
}

double true_total_flow(const WellRecord& r, std::size_t t) {
    const TargetRow& g = r.targets[t];
    return ((g.woil + g.wwat) + g.wgas) + gas_lift_mass_rate(r.ops[t].qgl, r.design.gas_constant);
}

Metrics evaluate_model(Model& model, std::span<const WellRecord> records, const NormStats& stats, double mape_floor) {
    if (records.empty()) throw ShapeError("evaluation needs at least one well");
    Metrics m;
    m.mape_floor = mape_floor;
    m.has_regime = model.has_regime_head();
    m.n_wells = records.size();
    std::vector<double> p_tot, t_tot, p_oil, t_oil, p_wat, t_wat, p_gas, t_gas, p_pbh, t_pbh, p_tbh, t_tbh;
    std::vector<int> lab_bh, lab_wh;
    Mat logits_bh(0, 3), logits_wh(0, 3);
    double residual_sum = 0.0;
    for (const WellRecord& r : records) {
        const PredictionSequence pred = model.forward(make_model_input(r, stats), stats);
        const auto T = static_cast<std::size_t>(pred.steps());
        residual_sum += mass_residual(pred) * static_cast<double>(T);
        m.violations += physics_violations(pred, r.ops);
        for (std::size_t t = 0; t < T; ++t) {
            const auto i = static_cast<Eigen::Index>(t);
            const TargetRow& g = r.targets[t];
            p_tot.push_back(pred.w_tot(i));
            t_tot.push_back(true_total_flow(r, t));
            p_oil.push_back(pred.flows(i, 0));
            t_oil.push_back(g.woil);
            p_wat.push_back(pred.flows(i, 1));
            t_wat.push_back(g.wwat);
            p_gas.push_back(pred.flows(i, 2));
            t_gas.push_back(g.wgas);
            p_pbh.push_back(pred.pbh(i));
            t_pbh.push_back(g.pbh);
            p_tbh.push_back(pred.tbh(i));
            t_tbh.push_back(g.tbh);
            lab_bh.push_back(g.frbh);
            lab_wh.push_back(g.frwh);
        }
        if (m.has_regime) {
            Mat a(logits_bh.rows() + pred.regime_bh.rows(), 3);
            a << logits_bh, pred.regime_bh;
            logits_bh = std::move(a);
            Mat b(logits_wh.rows() + pred.regime_wh.rows(), 3);
            b << logits_wh, pred.regime_wh;
            logits_wh = std::move(b);
        }
    }
    m.n_points = p_tot.size();
    m.rmse_wtot = rmse(p_tot, t_tot);
    m.rmse_woil = rmse(p_oil, t_oil);
    m.rmse_wwat = rmse(p_wat, t_wat);
    m.rmse_wgas = rmse(p_gas, t_gas);
    m.rmse_pbh = rmse(p_pbh, t_pbh);
    m.rmse_tbh = rmse(p_tbh, t_tbh);
    m.mape_wtot = mape(p_tot, t_tot, mape_floor);
    m.mass_residual = residual_sum / static_cast<double>(m.n_points);
    if (m.has_regime) {
        m.confusion_bh = confusion_matrix(logits_bh, lab_bh);
        m.confusion_wh = confusion_matrix(logits_wh, lab_wh);
        m.reg_bh = accuracy_from_confusion(m.confusion_bh);
        m.reg_wh = accuracy_from_confusion(m.confusion_wh);
    }
    return m;
}

std::string scatter_csv(Model& model, std::span<const WellRecord> records, const NormStats& stats) {
    std::ostringstream out;
    out << "well_id,step,target,true,pred\n";
    for (const WellRecord& r : records) {
        const PredictionSequence pred = model.forward(make_model_input(r, stats), stats);
        for (std::size_t t = 0; t < r.steps(); ++t) {
            const auto i = static_cast<Eigen::Index>(t);
            const TargetRow& g = r.targets[t];
            const std::pair<const char*, std::pair<double, double>> rows[] = {
                {"WOIL", {g.woil, pred.flows(i, 0)}},      {"WWAT", {g.wwat, pred.flows(i, 1)}},
                {"WGAS", {g.wgas, pred.flows(i, 2)}},      {"WTOT", {true_total_flow(r, t), pred.w_tot(i)}},
                {"PBH", {g.pbh, pred.pbh(i)}},             {"TBH", {g.tbh, pred.tbh(i)}},
            };
            for (const auto& [name, v] : rows) {
                out << r.well_id << ',' << t << ',' << name << ',' << format_double(v.first) << ','
                    << format_double(v.second) << '\n';
            }
        }
    }
    return out.str();
}

namespace {

std::string regime_cell(const Metrics& m, double v) { return m.has_regime ? format_double(v) : "NA"; }

const char* kMetricHeader = "WTOT,WOIL,WWAT,WGAS,PBH,TBH,RegBH,RegWH,WTOT_MAPE,mape_floor,mape_points,mape_excluded,"
                            "neg_flow,pres_order_viol,temp_order_viol,mass_residual";

std::string metric_cells(const Metrics& m) {
    std::string s = format_double(m.rmse_wtot) + ',' + format_double(m.rmse_woil) + ',' + format_double(m.rmse_wwat) +
                    ',' + format_double(m.rmse_wgas) + ',' + format_double(m.rmse_pbh) + ',' +
                    format_double(m.rmse_tbh) + ',' + regime_cell(m, m.reg_bh) + ',' + regime_cell(m, m.reg_wh) + ',' +
                    format_double(m.mape_wtot.percent) + ',' + format_double(m.mape_floor) + ',' +
                    std::to_string(m.mape_wtot.used) + ',' + std::to_string(m.mape_wtot.excluded) + ',' +
                    std::to_string(m.violations.negative_flow) + ',' + std::to_string(m.violations.pressure_order) +
                    ',' + std::to_string(m.violations.temp_order) + ',' + format_double(m.mass_residual);
    return s;
}

} // namespace

std::string metrics_csv(const Metrics& m) {
    return std::string(kMetricHeader) + ",n_wells,n_points\n" + metric_cells(m) + ',' + std::to_string(m.n_wells) +
           ',' + std::to_string(m.n_points) + '\n';
}

std::vector<AblationCell> experiment_cells(int experiment) {
    if (experiment == 1) {
        return {{"No-Config", Variant::no_config, true, true},
                {"Concat-Config", Variant::concat_config, true, true},
                {"FiLM+CrossAttn", Variant::film_crossattn, true, true}};
    }
    if (experiment == 2) {
        return {{"FiLM+Phys+Regime", Variant::film_crossattn, true, true},
                {"FiLM+Regime", Variant::film_crossattn, false, true},
                {"FiLM+Phys", Variant::film_crossattn, true, false},
                {"FiLM-only", Variant::film_crossattn, false, false}};
    }
    throw ConfigError("unknown experiment " + std::to_string(experiment) + " (expected 1 or 2)");
}

AblationReport run_ablation(std::span<const WellRecord> records, const std::vector<AblationCell>& cells,
                            const AblationSettings& s, std::ostream* progress) {
    AblationReport rep;
    rep.settings = s;
    rep.n_wells = records.size();
    rep.steps = records.empty() ? 0 : records.front().steps();

    const SplitAssignment split = stratified_split(records, s.fractions, s.strata_bins, s.seed);
    const auto train = select_split(records, split, Split::train);
    const auto val = select_split(records, split, Split::val);
    const auto test = select_split(records, split, Split::test);
    rep.n_train = train.size();
    rep.n_val = val.size();
    rep.n_test = test.size();
    if (test.empty()) throw ConfigError("ablation needs a non-empty test split");

    const NormStats stats = fit_norm_stats(train);
    check_no_leakage(stats, train, val);

    for (const AblationCell& cell : cells) {
        AblationRow row;
        row.cell = cell;
        try {
            ModelConfig mc = s.model;
            mc.variant = cell.variant;
            mc.use_physics = cell.physics;
            mc.use_regime = cell.regime;
            mc.seed = s.seed;
            TrainConfig tc = s.train;
            tc.seed = s.seed;
            Model model(mc);
            row.parameters = model.parameter_count();
            if (progress) *progress << "ablate: cell " << cell.name << " (" << row.parameters << " parameters)\n";
            const TrainHistory hist = fit(model, train, val, stats, tc, s.weights, progress);
            row.best_epoch = hist.best_epoch;
            row.epochs_run = static_cast<int>(hist.epochs.size());
            row.metrics = evaluate_model(model, test, stats, s.mape_floor);
            if (row.metrics.mass_residual != 0.0) {
                throw TrainingError("structural mass balance violated: residual " +
                                    format_double(row.metrics.mass_residual));
            }
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
            if (progress) *progress << "ablate: cell " << cell.name << " failed: " << e.what() << '\n';
        }
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

std::string ablation_csv(const AblationReport& rep) {
    std::ostringstream out;
    out << "experiment,cell,variant,physics,regime,status," << kMetricHeader
        << ",best_epoch,epochs,parameters,seed,d,T,n_wells,n_train,n_val,n_test,n_test_points,error\n";
    for (const AblationRow& r : rep.rows) {
        out << rep.settings.experiment << ',' << r.cell.name << ',' << to_string(r.cell.variant) << ','
            << (r.cell.physics ? "on" : "off") << ',' << (r.cell.regime ? "on" : "off") << ','
            << (r.ok ? "ok" : "failed") << ',';
        if (r.ok) {
            out << metric_cells(r.metrics);
        } else {
            out << "NA,NA,NA,NA,NA,NA,NA,NA,NA," << format_double(rep.settings.mape_floor) << ",NA,NA,NA,NA,NA,NA";
        }
        std::string err = r.error;
        for (char& c : err) {
            if (c == ',' || c == '\n' || c == '"') c = ' ';
        }
        out << ',' << r.best_epoch << ',' << r.epochs_run << ',' << r.parameters << ',' << rep.settings.seed << ','
            << rep.settings.model.embed_dim << ',' << rep.steps << ',' << rep.n_wells << ',' << rep.n_train << ','
            << rep.n_val << ',' << rep.n_test << ',' << (r.ok ? std::to_string(r.metrics.n_points) : "NA") << ','
            << err << '\n';
    }
    return out.str();
}

} // namespace vfm
