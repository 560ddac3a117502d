#include "vfm/designopt.hpp"

#include "vfm/errors.hpp"
#include "vfm/textio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace vfm {

std::vector<Scenario> scenarios_from_records(std::span<const WellRecord> records, const std::vector<std::string>& ids) {
    std::vector<Scenario> out;
    for (const auto& id : ids) {
        auto it = std::find_if(records.begin(), records.end(), [&](const WellRecord& r) { return r.well_id == id; });
        if (it == records.end()) throw ConfigError("scenario well '" + id + "' not found");
        out.push_back({it->well_id, it->ops});
    }
    if (out.empty()) throw ConfigError("at least one scenario is required");
    return out;
}

std::vector<Scenario> representative_scenarios(std::span<const WellRecord> records, std::size_t n) {
    if (records.empty() || n == 0) throw ConfigError("representative scenarios need wells and n >= 1");
    std::vector<std::size_t> idx(records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return records[a].design.reservoir_pressure < records[b].design.reservoir_pressure;
    });
    n = std::min(n, records.size());
    std::vector<Scenario> out;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t pos = n == 1 ? idx.size() / 2 : k * (idx.size() - 1) / (n - 1);
        const WellRecord& r = records[idx[pos]];
        out.push_back({r.well_id, r.ops});
    }
    return out;
}

namespace {

Mat normalize_ops(const OperationalSequence& ops, const NormStats& stats) {
    Mat x(static_cast<Eigen::Index>(ops.size()), kNumOps);
    for (std::size_t t = 0; t < ops.size(); ++t) {
        for (std::size_t j = 0; j < kNumOps; ++j) {
            x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) =
                zscore(ops[t].get(static_cast<OpField>(j)), stats.ops[j]);
        }
    }
    return x;
}

Vec lift_gas(const OperationalSequence& ops, double gas_constant) {
    Vec w(static_cast<Eigen::Index>(ops.size()));
    for (std::size_t t = 0; t < ops.size(); ++t) w(static_cast<Eigen::Index>(t)) = gas_lift_mass_rate(ops[t].qgl, gas_constant);
    return w;
}

bool is_fraction(DesignField f) {
    return f == DesignField::frac_gas || f == DesignField::frac_oil || f == DesignField::frac_wat;
}

} // namespace

Vec slug_probability_from_logits(const Mat& logits) {
    Vec p(logits.rows());
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        const double m = logits.row(t).maxCoeff();
        const double denom = (logits.row(t).array() - m).exp().sum();
        p(t) = std::exp(logits(t, static_cast<Eigen::Index>(Regime::slug_churn)) - m) / denom;
    }
    return p;
}

ModelSurrogate::ModelSurrogate(Model& model, const NormStats& stats, std::vector<Scenario> scenarios,
                               DesignBounds bounds)
    : model_(model), stats_(stats), scenarios_(std::move(scenarios)), bounds_(std::move(bounds)) {
    stats_.require_fitted();
    if (scenarios_.empty()) throw ConfigError("design evaluation needs at least one scenario");
    if (!model_.has_regime_head()) throw ConfigError("design evaluation needs a model with a regime head");
    for (const auto& sc : scenarios_) {
        if (sc.ops.empty()) throw ConfigError("scenario '" + sc.well_id + "' has no operating points");
        ops_norm_.push_back(normalize_ops(sc.ops, stats_));
        if (model_.config().variant == Variant::film_crossattn) encoded_ops_.push_back(model_.encode_ops(ops_norm_.back()));
    }
}

ObjectiveValues ModelSurrogate::evaluate(const WellDesign& design) {
    if (auto v = bounds_.violation(design); !v.empty()) throw DataError("design rejected: " + v);
    validate(design);
    ++evaluations_;
    const auto dv = to_design_vector(design, stats_);
    const RowVec c = Eigen::Map<const RowVec>(dv.data(), static_cast<Eigen::Index>(dv.size()));
    double oil = 0.0, slug = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < scenarios_.size(); ++k) {
        const Vec w_gl = lift_gas(scenarios_[k].ops, design.gas_constant);
        PredictionSequence pred;
        if (model_.config().variant == Variant::film_crossattn) {
            pred = model_.forward_encoded(encoded_ops_[k], c, w_gl, stats_);
        } else {
            pred = model_.forward(ModelInput{ops_norm_[k], c, w_gl}, stats_);
        }
        oil += pred.flows.col(0).sum();
        slug += slug_probability_from_logits(pred.regime_bh).sum();
        n += static_cast<std::size_t>(pred.steps());
    }
    ObjectiveValues o;
    o.mean_oil = oil / static_cast<double>(n);
    o.mean_slug = slug / static_cast<double>(n);
    return o;
}

OracleSurrogate::OracleSurrogate(std::vector<Scenario> scenarios, OracleConstants c)
    : scenarios_(std::move(scenarios)), c_(c) {
    if (scenarios_.empty()) throw ConfigError("oracle evaluation needs at least one scenario");
}

ObjectiveValues OracleSurrogate::evaluate(const WellDesign& design) {
    double oil = 0.0, slug = 0.0;
    std::size_t n = 0;
    for (const auto& sc : scenarios_) {
        for (const auto& row : sc.ops) {
            const OperatingPoint pt = simulate_operating_point(design, row.chk, row.qgl, c_);
            oil += pt.targets.woil;
            slug += pt.targets.frbh == static_cast<int>(Regime::slug_churn) ? 1.0 : 0.0;
            ++n;
        }
    }
    ObjectiveValues o;
    o.mean_oil = oil / static_cast<double>(n);
    o.mean_slug = slug / static_cast<double>(n);
    return o;
}

ObjectiveValues evaluate_design(Model& model, const NormStats& stats, const WellDesign& design,
                                const std::vector<Scenario>& scenarios, const DesignBounds& bounds) {
    ModelSurrogate s(model, stats, scenarios, bounds);
    return s.evaluate(design);
}

std::vector<ObjectiveValues> evaluate_designs(Surrogate& s, std::span<const WellDesign> designs) {
    std::vector<ObjectiveValues> out;
    out.reserve(designs.size());
    for (const auto& d : designs) out.push_back(s.evaluate(d));
    return out;
}

double complexity(const WellDesign& d, const DesignBounds& bounds) {
    auto hat = [&](DesignField f) {
        const FieldBounds& b = bounds[f];
        if (!(b.width() > 0.0)) throw ConfigError(std::string("complexity: zero-width bound for ") + std::string(column_name(f)));
        return (d.get(f) - b.lower) / b.width();
    };
    return 0.25 * hat(DesignField::tubing_diameter) + 0.30 * hat(DesignField::tubing_length) +
           0.20 * hat(DesignField::max_liquid_inflow) + 0.15 * hat(DesignField::choke_coefficient) +
           0.10 * (d.choke_profile != ChokeProfile::linear ? 1.0 : 0.0);
}

DesignBounds population_bounds(std::span<const WellRecord> records) {
    if (records.empty()) throw ConfigError("population bounds need at least one well");
    DesignBounds b = DesignBounds::defaults();
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        const DesignField f = design_field_at(i);
        if (is_fraction(f)) continue; // fractions are renormalised, so their box stays [0, 1]
        double lo = records.front().design.get(f), hi = lo;
        for (const auto& r : records) {
            lo = std::min(lo, r.design.get(f));
            hi = std::max(hi, r.design.get(f));
        }
        b.numeric[i] = {lo, hi};
    }
    return b;
}

bool dominates(const ObjectiveValues& a, const ObjectiveValues& b, bool with_complexity) {
    bool no_worse = a.mean_oil >= b.mean_oil && a.mean_slug <= b.mean_slug;
    bool better = a.mean_oil > b.mean_oil || a.mean_slug < b.mean_slug;
    if (with_complexity) {
        no_worse = no_worse && a.complexity <= b.complexity;
        better = better || a.complexity < b.complexity;
    }
    return no_worse && better;
}

std::vector<ParetoPoint> pareto_filter(const std::vector<ParetoPoint>& points, bool with_complexity) {
    std::vector<ParetoPoint> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
            dominated = j != i && dominates(points[j].objectives, points[i].objectives, with_complexity);
        }
        if (!dominated) out.push_back(points[i]);
    }
    return out;
}

DeResult differential_evolution(const std::function<double(std::span<const double>)>& objective, const Box& box,
                                const DeOptions& opt) {
    if (opt.pop_size < 4) throw ConfigError("differential evolution needs pop_size >= 4");
    if (opt.generations < 0) throw ConfigError("generations must be >= 0");
    if (box.empty()) throw ConfigError("differential evolution needs at least one dimension");
    for (const auto& [lo, hi] : box) {
        if (!(lo <= hi)) throw ConfigError("differential evolution box has lower > upper");
    }
    const std::size_t np = static_cast<std::size_t>(opt.pop_size);
    const std::size_t dim = box.size();
    Rng rng(opt.seed);
    auto eval = [&](const std::vector<double>& x) {
        const double f = objective(x);
        return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
    };

    DeResult r;
    r.population.assign(np, std::vector<double>(dim));
    r.fitness.resize(np);
    for (auto& x : r.population) {
        for (std::size_t d = 0; d < dim; ++d) x[d] = rng.uniform(box[d].first, box[d].second);
    }
    for (std::size_t i = 0; i < np; ++i) r.fitness[i] = eval(r.population[i]);
    auto record_best = [&]() {
        const auto it = std::min_element(r.fitness.begin(), r.fitness.end());
        const auto i = static_cast<std::size_t>(it - r.fitness.begin());
        if (*it < r.best_value || r.best.empty()) {
            r.best_value = *it;
            r.best = r.population[i];
        }
        r.trace.push_back(r.best_value);
    };
    record_best();

    std::vector<double> trial(dim);
    for (int g = 0; g < opt.generations; ++g) {
        auto next = r.population;
        auto next_fit = r.fitness;
        for (std::size_t i = 0; i < np; ++i) {
            std::size_t a, b, c;
            do a = rng.index(np); while (a == i);
            do b = rng.index(np); while (b == i || b == a);
            do c = rng.index(np); while (c == i || c == a || c == b);
            const std::size_t jrand = rng.index(dim);
            for (std::size_t d = 0; d < dim; ++d) {
                const bool cross = rng.uniform() < opt.CR || d == jrand;
                double v = cross ? r.population[a][d] + opt.F * (r.population[b][d] - r.population[c][d])
                                 : r.population[i][d];
                trial[d] = std::clamp(v, box[d].first, box[d].second);
            }
            const double f = eval(trial);
            if (f <= r.fitness[i]) {
                next[i] = trial;
                next_fit[i] = f;
            }
        }
        r.population = std::move(next);
        r.fitness = std::move(next_fit);
        record_best();
    }
    return r;
}

Box design_box(const DesignBounds& bounds) {
    Box box;
    for (const auto& fb : bounds.numeric) box.emplace_back(fb.lower, fb.upper);
    box.emplace_back(0.0, static_cast<double>(kNumChokeProfiles));
    return box;
}

WellDesign decode_design(std::span<const double> genes) {
    if (genes.size() != kNumDesignNumeric + 1) throw ShapeError("design genome must have 21 genes");
    WellDesign d;
    d.set_numeric(genes.first(kNumDesignNumeric));
    d.frac_gas = std::max(0.0, d.frac_gas);
    d.frac_oil = std::max(0.0, d.frac_oil);
    d.frac_wat = std::max(0.0, d.frac_wat);
    if (d.frac_gas + d.frac_oil + d.frac_wat <= 0.0) d.frac_oil = 1.0;
    d.renormalize_fractions();
    const double g = genes[kNumDesignNumeric];
    const auto idx = static_cast<int>(std::clamp(std::floor(g), 0.0, static_cast<double>(kNumChokeProfiles - 1)));
    d.choke_profile = static_cast<ChokeProfile>(idx);
    return d;
}

std::vector<double> encode_design(const WellDesign& design) {
    const auto num = design.numeric();
    std::vector<double> g(num.begin(), num.end());
    g.push_back(static_cast<double>(design.choke_profile) + 0.5);
    return g;
}

NormalizationRange presample_range(Surrogate& s, const DesignBounds& bounds, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("presample size must be >= 1");
    const Box box = design_box(bounds);
    Rng rng(seed);
    NormalizationRange r;
    r.oil_min = r.slug_min = std::numeric_limits<double>::infinity();
    r.oil_max = r.slug_max = -std::numeric_limits<double>::infinity();
    std::vector<double> genes(box.size());
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t d = 0; d < box.size(); ++d) genes[d] = rng.uniform(box[d].first, box[d].second);
        const ObjectiveValues o = s.evaluate(decode_design(genes));
        r.oil_min = std::min(r.oil_min, o.mean_oil);
        r.oil_max = std::max(r.oil_max, o.mean_oil);
        r.slug_min = std::min(r.slug_min, o.mean_slug);
        r.slug_max = std::max(r.slug_max, o.mean_slug);
    }
    return r;
}

std::vector<std::array<double, 3>> simplex_weights(double step) {
    if (!(step > 0.0 && step <= 1.0)) throw ConfigError("simplex step must lie in (0, 1]");
    const int n = static_cast<int>(std::lround(1.0 / step));
    std::vector<std::array<double, 3>> out;
    for (int i = n; i >= 0; --i) {
        for (int j = n - i; j >= 0; --j) {
            const int k = n - i - j;
            out.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n, static_cast<double>(k) / n});
        }
    }
    return out;
}

namespace {

struct Archive {
    Surrogate& s;
    const DesignBounds& bounds;
    std::map<std::vector<double>, ObjectiveValues> cache;

    ObjectiveValues operator()(std::span<const double> genes) {
        std::vector<double> key(genes.begin(), genes.end());
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        const WellDesign d = decode_design(genes);
        ObjectiveValues o = s.evaluate(d);
        o.complexity = complexity(d, bounds);
        cache.emplace(std::move(key), o);
        return o;
    }
};

double span_or_one(double lo, double hi) { return hi > lo ? hi - lo : 1.0; }

OptimizationResult run_scalarised(Surrogate& s, const DesignBounds& bounds, const OptimizationOptions& opt,
                                  const std::vector<std::vector<double>>& weight_sets, bool tri) {
    bounds.validate();
    const Box box = design_box(bounds);
    OptimizationResult res;
    res.range = presample_range(s, bounds, opt.presample, derive_seed(opt.de.seed, 0));
    const double oil_span = span_or_one(res.range.oil_min, res.range.oil_max);
    const double slug_span = span_or_one(res.range.slug_min, res.range.slug_max);

    Archive archive{s, bounds, {}};
    std::vector<ParetoPoint> pool;
    std::map<std::vector<double>, bool> seen;
    auto add = [&](const std::vector<double>& genes, const std::vector<double>& w) {
        if (seen.emplace(genes, true).second) pool.push_back({decode_design(genes), archive(genes), w});
    };

    for (std::size_t k = 0; k < weight_sets.size(); ++k) {
        const auto& w = weight_sets[k];
        auto objective = [&](std::span<const double> genes) {
            const ObjectiveValues o = archive(genes);
            const double oil_n = (o.mean_oil - res.range.oil_min) / oil_span;
            const double slug_n = (o.mean_slug - res.range.slug_min) / slug_span;
            double v = w[0] * (-oil_n) + w[1] * slug_n;
            if (tri) v += w[2] * o.complexity;
            return v;
        };
        DeOptions de = opt.de;
        de.seed = derive_seed(opt.de.seed, k + 1);
        const DeResult r = differential_evolution(objective, box, de);
        res.subproblem_bests.push_back({decode_design(r.best), archive(r.best), w});
        add(r.best, w);
        for (const auto& x : r.population) add(x, w);
    }
    res.archive_size = pool.size();
    res.distinct_evaluations = archive.cache.size();
    res.front = pareto_filter(pool, tri);
    return res;
}

} // namespace

OptimizationResult optimize_biobjective(Surrogate& s, const DesignBounds& bounds, const OptimizationOptions& opt) {
    if (opt.n_weights < 1) throw ConfigError("n_weights must be >= 1");
    std::vector<std::vector<double>> ws;
    for (int k = 0; k < opt.n_weights; ++k) {
        const double w = opt.n_weights == 1 ? 1.0 : static_cast<double>(k) / (opt.n_weights - 1);
        ws.push_back({w, 1.0 - w});
    }
    return run_scalarised(s, bounds, opt, ws, false);
}

OptimizationResult optimize_triobjective(Surrogate& s, const DesignBounds& bounds, const OptimizationOptions& opt) {
    std::vector<std::vector<double>> ws;
    for (const auto& w : simplex_weights(opt.simplex_step)) ws.push_back({w[0], w[1], w[2]});
    return run_scalarised(s, bounds, opt, ws, true);
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw ConfigError("percentile of an empty set");
    if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
    std::sort(v.begin(), v.end());
    const double pos = (static_cast<double>(v.size()) - 1.0) * q / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BaselineDesigns baseline_designs(std::span<const WellRecord> train) {
    if (train.empty()) throw ConfigError("baseline designs need a non-empty training population");
    static constexpr DesignField kProduction[] = {DesignField::tubing_diameter, DesignField::tubing_length,
                                                  DesignField::max_liquid_inflow, DesignField::choke_coefficient,
                                                  DesignField::reservoir_pressure};
    BaselineDesigns out;
    std::array<std::size_t, kNumChokeProfiles> votes{};
    for (const auto& r : train) ++votes[static_cast<std::size_t>(r.design.choke_profile)];
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        const DesignField f = design_field_at(i);
        std::vector<double> v;
        v.reserve(train.size());
        double sum = 0.0;
        for (const auto& r : train) {
            v.push_back(r.design.get(f));
            sum += r.design.get(f);
        }
        const bool production = std::find(std::begin(kProduction), std::end(kProduction), f) != std::end(kProduction);
        out.p95.set(f, percentile(v, production ? 95.0 : 50.0));
        out.mean.set(f, sum / static_cast<double>(train.size()));
    }
    out.p95.choke_profile = ChokeProfile::linear;
    out.mean.choke_profile = static_cast<ChokeProfile>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    for (WellDesign* d : {&out.p95, &out.mean}) {
        if (d->frac_gas + d->frac_oil + d->frac_wat <= 0.0) d->frac_oil = 1.0;
        if (std::abs(d->frac_gas + d->frac_oil + d->frac_wat - 1.0) > 1e-12) d->renormalize_fractions();
    }
    return out;
}

WellDesign clamp_to_bounds(WellDesign d, const DesignBounds& bounds) {
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        const DesignField f = design_field_at(i);
        d.set(f, std::clamp(d.get(f), bounds.numeric[i].lower, bounds.numeric[i].upper));
    }
    if (d.frac_gas + d.frac_oil + d.frac_wat <= 0.0) d.frac_oil = 1.0;
    d.renormalize_fractions();
    return d;
}

std::string front_csv(const std::vector<ParetoPoint>& points, bool with_complexity) {
    std::ostringstream out;
    out << "w_oil,w_slug";
    if (with_complexity) out << ",w_complexity";
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) out << ',' << column_name(design_field_at(i));
    out << ",CHOKE_PROFILE,W_OIL,P_slug,C\n";
    for (const auto& p : points) {
        const std::size_t nw = with_complexity ? 3 : 2;
        for (std::size_t k = 0; k < nw; ++k) {
            if (k) out << ',';
            out << (k < p.weights.size() ? format_double(p.weights[k]) : "NA");
        }
        for (double v : p.design.numeric()) out << ',' << format_double(v);
        out << ',' << to_string(p.design.choke_profile) << ',' << format_double(p.objectives.mean_oil) << ','
            << format_double(p.objectives.mean_slug) << ',' << format_double(p.objectives.complexity) << '\n';
    }
    return out.str();
}

std::vector<SensitivityPoint> sensitivity_sweep(Surrogate& s, const WellDesign& base, DesignField field,
                                                std::size_t n_points, const DesignBounds& bounds) {
    if (n_points == 0) throw ConfigError("sensitivity sweep needs n_points >= 1");
    const FieldBounds& b = bounds[field];
    std::vector<SensitivityPoint> curve;
    for (std::size_t i = 0; i < n_points; ++i) {
        const double v = n_points == 1 ? b.mid()
                                       : b.lower + b.width() * static_cast<double>(i) / static_cast<double>(n_points - 1);
        WellDesign d = base;
        d.set(field, v);
        if (is_fraction(field)) {
            double* others[2];
            int k = 0;
            for (DesignField f : {DesignField::frac_gas, DesignField::frac_oil, DesignField::frac_wat}) {
                if (f == field) continue;
                others[k++] = f == DesignField::frac_gas ? &d.frac_gas : f == DesignField::frac_oil ? &d.frac_oil : &d.frac_wat;
            }
            const double rest = 1.0 - v;
            const double sum = *others[0] + *others[1];
            if (sum > 0.0) {
                *others[0] *= rest / sum;
                *others[1] = rest - *others[0];
            } else {
                *others[0] = *others[1] = rest / 2.0;
            }
        }
        const ObjectiveValues o = s.evaluate(d);
        curve.push_back({v, o.mean_oil, o.mean_slug});
    }
    return curve;
}

std::string sensitivity_csv(DesignField field, const std::vector<SensitivityPoint>& curve) {
    std::ostringstream out;
    out << "field,value,W_OIL,P_slug\n";
    for (const auto& p : curve) {
        out << column_name(field) << ',' << format_double(p.value) << ',' << format_double(p.mean_oil) << ','
            << format_double(p.mean_slug) << '\n';
    }
    return out.str();
}

std::string_view to_string(RiskCategory c) {
    switch (c) {
    case RiskCategory::low: return "low";
    case RiskCategory::moderate: return "moderate";
    case RiskCategory::high: return "high";
    }
    return "low";
}

RiskCategory classify_risk(double p) {
    if (p <= 0.1) return RiskCategory::low;
    if (p <= 0.5) return RiskCategory::moderate;
    return RiskCategory::high;
}

SlugProbability model_slug_probability(Model& model, const NormStats& stats) {
    if (!model.has_regime_head()) throw ConfigError("integrity mapping needs a model with a regime head");
    return [&model, &stats](const WellRecord& r) {
        const PredictionSequence pred = model.forward(make_model_input(r, stats), stats);
        return slug_probability_from_logits(pred.regime_bh);
    };
}

std::vector<IntegrityEntry> integrity_map(std::span<const WellRecord> records, const SlugProbability& prob) {
    std::vector<IntegrityEntry> out;
    for (const auto& r : records) {
        const Vec p = prob(r);
        if (p.size() == 0) throw ShapeError("well '" + r.well_id + "' has no points");
        const double mean = p.mean();
        out.push_back({r.well_id, mean, classify_risk(mean)});
    }
    return out;
}

std::string integrity_csv(const std::vector<IntegrityEntry>& entries) {
    std::ostringstream out;
    out << "well_id,mean_slug_probability,category\n";
    for (const auto& e : entries) out << e.well_id << ',' << format_double(e.mean_slug) << ',' << to_string(e.category) << '\n';
    return out.str();
}

} // namespace vfm
