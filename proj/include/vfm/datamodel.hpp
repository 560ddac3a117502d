#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vfm {

inline constexpr std::size_t kNumDesignNumeric = 20;
inline constexpr std::size_t kNumChokeProfiles = 4;
inline constexpr std::size_t kDesignVectorSize = kNumDesignNumeric + kNumChokeProfiles;
inline constexpr std::size_t kNumOps = 8;
inline constexpr std::size_t kNumTargets = 5;
inline constexpr std::size_t kNumRegimes = 3;

enum class ChokeProfile { linear = 0, convex = 1, concave = 2, quick_opening = 3 };

std::string_view to_string(ChokeProfile p);
ChokeProfile parse_choke_profile(std::string_view s);

/// Numeric design fields in the fixed order used by the design vector and the CSV schema.
enum class DesignField {
    tubing_length,
    tubing_diameter,
    liquid_density,
    gas_constant,
    cp_gas,
    cp_liquid,
    friction_factor,
    heat_transfer,
    max_liquid_inflow,
    inflow_gas_fraction,
    choke_coefficient,
    critical_pressure_ratio,
    reservoir_pressure,
    separator_pressure,
    reservoir_temperature,
    surface_temperature,
    frac_gas,
    frac_oil,
    frac_wat,
    oil_density,
};

/// CSV column mnemonic, e.g. "P_R" for reservoir_pressure.
std::string_view column_name(DesignField f);
DesignField parse_design_field(std::string_view s);
inline std::size_t index_of(DesignField f) { return static_cast<std::size_t>(f); }
inline DesignField design_field_at(std::size_t i) { return static_cast<DesignField>(i); }

/// Static well design. SI units except pressures (bar) and temperatures (K).
struct WellDesign {
    double tubing_length = 0;           // m
    double tubing_diameter = 0;         // m
    double liquid_density = 0;          // kg/m3
    double gas_constant = 0;            // J/(kg K)
    double cp_gas = 0;                  // J/(kg K)
    double cp_liquid = 0;               // J/(kg K)
    double friction_factor = 0;         // Darcy, dimensionless
    double heat_transfer = 0;           // W/(m2 K)
    double max_liquid_inflow = 0;       // kg/s
    double inflow_gas_fraction = 0;     // mass fraction
    double choke_coefficient = 0;       // m2
    double critical_pressure_ratio = 0; // -
    double reservoir_pressure = 0;      // bar
    double separator_pressure = 0;      // bar
    double reservoir_temperature = 0;   // K
    double surface_temperature = 0;     // K
    double frac_gas = 0;
    double frac_oil = 0;
    double frac_wat = 0;
    double oil_density = 0; // kg/m3
    ChokeProfile choke_profile = ChokeProfile::linear;

    double get(DesignField f) const;
    void set(DesignField f, double v);
    std::array<double, kNumDesignNumeric> numeric() const;
    void set_numeric(std::span<const double> values);

    /// Rescales the three phase fractions to sum to one.
    void renormalize_fractions();

    bool operator==(const WellDesign&) const = default;
};

/// Throws DataError naming the first violated invariant.
void validate(const WellDesign& d);

enum class OpField { chk, qgl, pwh, pdc, twh, foil, fgas, fwat };
std::string_view column_name(OpField f);

struct OperationalRow {
    double chk = 0;  // percent
    double qgl = 0;  // Sm3/d
    double pwh = 0;  // bar
    double pdc = 0;  // bar
    double twh = 0;  // K
    double foil = 0; // mass fraction
    double fgas = 0;
    double fwat = 0;

    double get(OpField f) const;
    bool operator==(const OperationalRow&) const = default;
};
using OperationalSequence = std::vector<OperationalRow>;

enum class TargetField { woil, wwat, wgas, pbh, tbh };
std::string_view column_name(TargetField f);

enum class Regime { bubbly = 0, slug_churn = 1, annular = 2 };

struct TargetRow {
    double woil = 0; // kg/s
    double wwat = 0;
    double wgas = 0;
    double pbh = 0; // bar
    double tbh = 0; // K
    int frbh = 0;   // Regime label at bottomhole
    int frwh = 0;   // Regime label at wellhead

    double get(TargetField f) const;
    bool operator==(const TargetRow&) const = default;
};
using TargetSequence = std::vector<TargetRow>;

struct WellRecord {
    std::string well_id;
    WellDesign design;
    OperationalSequence ops;
    TargetSequence targets;

    std::size_t steps() const { return ops.size(); }
    bool operator==(const WellRecord&) const = default;
};

/// Lift-gas injection converted from Sm3/d to kg/s using the ideal-gas density at
/// standard conditions (1.01325 bar, 288.15 K) for the well's specific gas constant.
double gas_lift_mass_rate(double qgl_sm3_per_day, double gas_constant);

// ---------------------------------------------------------------------------
// Normalisation

struct FeatureStats {
    double mean = 0.0;
    double std = 1.0;
    bool operator==(const FeatureStats&) const = default;
};

enum class FeatureGroup { design, ops, target };

struct FeatureId {
    FeatureGroup group;
    std::size_t index;
};

/// Resolves a column mnemonic ("P_R", "CHK", "PBH", ...) to a feature; throws ConfigError.
FeatureId parse_feature_id(std::string_view name);

/// Per-feature z-score statistics. Population standard deviation, clamped to std_floor.
struct NormStats {
    static constexpr double kDefaultStdFloor = 1e-8;

    bool fitted = false;
    double std_floor = kDefaultStdFloor;
    std::array<FeatureStats, kNumDesignNumeric> design{};
    std::array<FeatureStats, kNumOps> ops{};
    std::array<FeatureStats, kNumTargets> targets{};

    const FeatureStats& at(FeatureId id) const;
    void require_fitted() const;

    /// Target variance in original units, used by the physics penalties.
    double target_variance(TargetField f) const {
        const double s = targets[static_cast<std::size_t>(f)].std;
        return s * s;
    }

    bool operator==(const NormStats&) const = default;
};

NormStats fit_norm_stats(std::span<const WellRecord> train_records);

double zscore(double x, const FeatureStats& s);
double inverse_zscore(double z, const FeatureStats& s);
std::vector<double> zscore(std::span<const double> values, const NormStats& stats, std::string_view feature);
std::vector<double> inverse_zscore(std::span<const double> values, const NormStats& stats, std::string_view feature);

/// 20 z-scored numeric fields followed by a one-hot choke profile [linear, convex, concave, quick-opening].
std::array<double, kDesignVectorSize> to_design_vector(const WellDesign& design, const NormStats& stats);

// ---------------------------------------------------------------------------
// Splitting

enum class Split { train = 0, val = 1, test = 2 };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

using SplitAssignment = std::map<std::string, Split>;

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

/// Quantile bin index in [0, k) of each value (rank based, ties broken by position).
std::vector<int> quantile_bins(std::span<const double> values, int k);

/// Stratified well-level split over (p_r, D, wl_max) quantile bins.
SplitAssignment stratified_split(std::span<const WellRecord> records, SplitFractions fractions, int k,
                                 std::uint64_t seed);

/// Records of one split, in input order.
std::vector<WellRecord> select_split(std::span<const WellRecord> records, const SplitAssignment& assignment,
                                     Split which);

// ---------------------------------------------------------------------------
// CSV portfolio schema

std::vector<std::string> portfolio_csv_header();
void write_portfolio_csv(std::ostream& out, std::span<const WellRecord> records);
void write_portfolio_csv(const std::string& path, std::span<const WellRecord> records);

/// Parses the portfolio schema. Columns are matched by name, a WTOT column is ignored,
/// wells are returned in order of first appearance.
std::vector<WellRecord> read_portfolio_csv(std::istream& in);
std::vector<WellRecord> read_portfolio_csv(const std::string& path);

} // namespace vfm
