#pragma once

#include "vfm/datamodel.hpp"
#include "vfm/network.hpp"
#include "vfm/synthwells.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vfm {

/// Reference operating conditions taken from a held-out well.
struct Scenario {
    std::string well_id;
    OperationalSequence ops;
};

/// Scenarios for the given well ids, in the order requested. Throws ConfigError for unknown ids.
std::vector<Scenario> scenarios_from_records(std::span<const WellRecord> records, const std::vector<std::string>& ids);

/// `n` wells spread evenly over the reservoir-pressure ranking of `records`.
std::vector<Scenario> representative_scenarios(std::span<const WellRecord> records, std::size_t n = 5);

struct ObjectiveValues {
    double mean_oil = 0.0;  // kg/s
    double mean_slug = 0.0; // mean bottomhole slug/churn probability
    double complexity = std::numeric_limits<double>::quiet_NaN();
};

/// Anything that maps a design to (mean oil rate, mean slug probability).
class Surrogate {
public:
    virtual ~Surrogate() = default;
    virtual ObjectiveValues evaluate(const WellDesign& design) = 0;
};

/// Network surrogate. The operational encoding of each scenario is computed once for film_crossattn.
class ModelSurrogate : public Surrogate {
public:
    ModelSurrogate(Model& model, const NormStats& stats, std::vector<Scenario> scenarios, DesignBounds bounds);

    /// Throws DataError naming the violated bound for designs outside the box.
    ObjectiveValues evaluate(const WellDesign& design) override;
    std::size_t evaluations() const { return evaluations_; }

private:
    Model& model_;
    const NormStats& stats_;
    std::vector<Scenario> scenarios_;
    DesignBounds bounds_;
    std::vector<Mat> encoded_ops_;
    std::vector<Mat> ops_norm_;
    std::size_t evaluations_ = 0;
};

/// Reference surrogate that re-simulates every scenario point with the well oracle. The slug
/// probability is the fraction of points labelled slug/churn at the bottomhole.
class OracleSurrogate : public Surrogate {
public:
    explicit OracleSurrogate(std::vector<Scenario> scenarios, OracleConstants c = {});
    ObjectiveValues evaluate(const WellDesign& design) override;

private:
    std::vector<Scenario> scenarios_;
    OracleConstants c_;
};

ObjectiveValues evaluate_design(Model& model, const NormStats& stats, const WellDesign& design,
                                const std::vector<Scenario>& scenarios, const DesignBounds& bounds);
std::vector<ObjectiveValues> evaluate_designs(Surrogate& s, std::span<const WellDesign> designs);

/// 0.25 D + 0.30 L + 0.20 wl_max + 0.15 K_c (each min-max scaled within bounds) + 0.10 [choke not linear].
double complexity(const WellDesign& design, const DesignBounds& bounds);

/// Per-field [min, max] of the designs in `records`; all four choke profiles admitted.
DesignBounds population_bounds(std::span<const WellRecord> records);

// ---------------------------------------------------------------------------
// Pareto filtering. Oil is maximised, slug and complexity minimised.

struct ParetoPoint {
    WellDesign design;
    ObjectiveValues objectives;
    std::vector<double> weights;
};

bool dominates(const ObjectiveValues& a, const ObjectiveValues& b, bool with_complexity);
std::vector<ParetoPoint> pareto_filter(const std::vector<ParetoPoint>& points, bool with_complexity);

// ---------------------------------------------------------------------------
// Differential evolution (rand/1/bin) minimising a scalar objective over a box.

struct DeOptions {
    int pop_size = 32;
    int generations = 30;
    double F = 0.7;
    double CR = 0.9;
    std::uint64_t seed = 42;
};

struct DeResult {
    std::vector<double> best;
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<double> trace; // best-so-far after initialisation and after each generation
    std::vector<std::vector<double>> population;
    std::vector<double> fitness;
};

using Box = std::vector<std::pair<double, double>>;

DeResult differential_evolution(const std::function<double(std::span<const double>)>& objective, const Box& box,
                                const DeOptions& opt);

/// Genome: the 20 numeric design fields followed by a choke gene in [0, 4].
Box design_box(const DesignBounds& bounds);
/// Phase fractions are renormalised; the choke gene is floored, with 4.0 mapping to the last profile.
WellDesign decode_design(std::span<const double> genes);
std::vector<double> encode_design(const WellDesign& design);

// ---------------------------------------------------------------------------
// Scalarised multi-objective search

struct NormalizationRange {
    double oil_min = 0.0, oil_max = 1.0;
    double slug_min = 0.0, slug_max = 1.0;
};

/// Oil and slug ranges over `n` seeded random designs from the box.
NormalizationRange presample_range(Surrogate& s, const DesignBounds& bounds, std::size_t n, std::uint64_t seed);

/// All (i, j, k) / n with i + j + k = n, n = round(1 / step).
std::vector<std::array<double, 3>> simplex_weights(double step);

struct OptimizationOptions {
    int n_weights = 11;      // bi-objective sub-problems, w = 0, 1/(n-1), ..., 1
    double simplex_step = 0.2;
    std::size_t presample = 200;
    DeOptions de;
};

struct OptimizationResult {
    std::vector<ParetoPoint> front;
    std::vector<ParetoPoint> subproblem_bests;
    NormalizationRange range;
    std::size_t archive_size = 0;
    std::size_t distinct_evaluations = 0;
};

OptimizationResult optimize_biobjective(Surrogate& s, const DesignBounds& bounds, const OptimizationOptions& opt);
OptimizationResult optimize_triobjective(Surrogate& s, const DesignBounds& bounds, const OptimizationOptions& opt);

struct BaselineDesigns {
    WellDesign p95;
    WellDesign mean;
};

/// Linear-interpolated percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);

/// p95: 95th percentile of D, L, wl_max, K_c, p_r and medians elsewhere, linear choke.
/// mean: arithmetic means, renormalised fractions, modal choke profile (lowest index on ties).
BaselineDesigns baseline_designs(std::span<const WellRecord> train_records);

/// Clamps every numeric field into the box, then renormalises the phase fractions.
WellDesign clamp_to_bounds(WellDesign d, const DesignBounds& bounds);

std::string front_csv(const std::vector<ParetoPoint>& points, bool with_complexity);

// ---------------------------------------------------------------------------
// Sensitivity and integrity

struct SensitivityPoint {
    double value = 0.0;
    double mean_oil = 0.0;
    double mean_slug = 0.0;
};

/// Sweeps one numeric field linearly across its bounds with everything else fixed. Sweeping a
/// phase fraction rescales the other two so the three still sum to one.
std::vector<SensitivityPoint> sensitivity_sweep(Surrogate& s, const WellDesign& base, DesignField field,
                                                std::size_t n_points, const DesignBounds& bounds);
std::string sensitivity_csv(DesignField field, const std::vector<SensitivityPoint>& curve);

enum class RiskCategory { low, moderate, high };
std::string_view to_string(RiskCategory c);
/// low <= 0.1 < moderate <= 0.5 < high
RiskCategory classify_risk(double mean_slug_probability);

struct IntegrityEntry {
    std::string well_id;
    double mean_slug = 0.0;
    RiskCategory category = RiskCategory::low;
};

/// Per-time-step bottomhole slug/churn probability of a well.
using SlugProbability = std::function<Vec(const WellRecord&)>;
SlugProbability model_slug_probability(Model& model, const NormStats& stats);

/// Softmax probability of class 1 for each logit row.
Vec slug_probability_from_logits(const Mat& logits);

std::vector<IntegrityEntry> integrity_map(std::span<const WellRecord> records, const SlugProbability& prob);
std::string integrity_csv(const std::vector<IntegrityEntry>& entries);

} // namespace vfm
