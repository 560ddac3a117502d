#pragma once

#include "vfm/datamodel.hpp"
#include "vfm/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace vfm {

struct FieldBounds {
    double lower = 0.0;
    double upper = 0.0;
    double mid() const { return 0.5 * (lower + upper); }
    double width() const { return upper - lower; }
};

/// Feasible design box. Phase fractions are sampled in their box and then renormalised.
struct DesignBounds {
    std::array<FieldBounds, kNumDesignNumeric> numeric{};
    std::vector<ChokeProfile> profiles;

    static DesignBounds defaults();

    const FieldBounds& operator[](DesignField f) const { return numeric[index_of(f)]; }
    FieldBounds& operator[](DesignField f) { return numeric[index_of(f)]; }

    /// Throws ConfigError unless lower < upper everywhere, profiles non-empty and p_r/p_s, T_r/T_s disjoint.
    void validate() const;

    /// Empty when the design lies inside the box; otherwise names the violated bound.
    std::string violation(const WellDesign& d) const;
};

/// Constants of the oracle's closure relations.
struct OracleConstants {
    double drawdown_dT = 5.0;       // K of bottomhole cooling at full drawdown
    double bubbly_max_vsg = 0.5;    // m/s
    double annular_min_vsg = 15.0;  // m/s
    double annular_min_ratio = 10.0;
    int max_iterations = 200;
    double gravity = 9.81;
};

struct OperatingPoint {
    OperationalRow ops;
    TargetRow targets;
    double w_gl = 0.0;  // kg/s
    double w_tot = 0.0; // kg/s, equals ((woil + wwat) + wgas) + w_gl
    double vsg_bh = 0.0, vsl_bh = 0.0, vsg_wh = 0.0, vsl_wh = 0.0;
    int iterations = 0;
};

/// Choke opening characteristic g(u) for u in [0,1].
double choke_characteristic(ChokeProfile p, double u);

/// Regime label from superficial gas/liquid velocities.
Regime classify_regime(double vsg, double vsl, const OracleConstants& c = {});

WellDesign sample_design(const DesignBounds& bounds, Rng& rng);

/// Steady state of one well at a given choke opening (%) and lift-gas rate (Sm3/d).
OperatingPoint simulate_operating_point(const WellDesign& design, double chk_percent, double qgl,
                                        const OracleConstants& c = {});

struct ScheduleStep {
    double chk = 0.0;
    double qgl = 0.0;
};

struct ScheduleOptions {
    double chk_min = 5.0;
    double chk_max = 95.0;
    double chk_jitter = 2.5;     // percent points
    double gas_lift_switch_prob = 0.08;
    double gas_lift_max = 150000.0; // Sm3/d
};

/// Choke sweep across [chk_min, chk_max] with jitter and occasional gas-lift steps.
std::vector<ScheduleStep> operating_schedule(std::size_t steps, Rng& rng, const ScheduleOptions& opt = {});

struct PortfolioFailure {
    std::string well_id;
    std::string message;
};

struct Portfolio {
    std::vector<WellRecord> records;
    std::vector<PortfolioFailure> failures;
    std::size_t requested = 0;
};

/// Generates `n_wells` wells of `steps` points each. Well i uses a stream derived from
/// (seed, i), so a well's content does not depend on the other wells.
Portfolio generate_portfolio(std::size_t n_wells, std::size_t steps, const DesignBounds& bounds,
                             std::uint64_t seed, const OracleConstants& c = {}, const ScheduleOptions& opt = {});

std::string well_id_for(std::size_t index);

/// Plain-text `key=value` sidecar describing bounds, seed and shape of a generated portfolio.
std::string bounds_sidecar_text(const DesignBounds& bounds, std::uint64_t seed, std::size_t n_wells,
                                std::size_t steps);

} // namespace vfm
