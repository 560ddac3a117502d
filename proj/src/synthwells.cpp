#include "vfm/synthwells.hpp"

#include "vfm/errors.hpp"
#include "vfm/textio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace vfm {

DesignBounds DesignBounds::defaults() {
    DesignBounds b;
    auto set = [&](DesignField f, double lo, double hi) { b[f] = {lo, hi}; };
    set(DesignField::tubing_length, 300.0, 800.0);
    set(DesignField::tubing_diameter, 0.05, 0.20);
    set(DesignField::liquid_density, 700.0, 1000.0);
    set(DesignField::gas_constant, 350.0, 550.0);
    set(DesignField::cp_gas, 1800.0, 2600.0);
    set(DesignField::cp_liquid, 1800.0, 4200.0);
    set(DesignField::friction_factor, 0.01, 0.04);
    set(DesignField::heat_transfer, 5.0, 50.0);
    set(DesignField::max_liquid_inflow, 2.0, 40.0);
    set(DesignField::inflow_gas_fraction, 0.0, 0.5);
    set(DesignField::choke_coefficient, 2e-4, 2e-3);
    set(DesignField::critical_pressure_ratio, 0.3, 0.7);
    set(DesignField::reservoir_pressure, 100.0, 500.0);
    set(DesignField::separator_pressure, 5.0, 20.0);
    set(DesignField::reservoir_temperature, 330.0, 400.0);
    set(DesignField::surface_temperature, 280.0, 300.0);
    set(DesignField::frac_gas, 0.0, 1.0);
    set(DesignField::frac_oil, 0.0, 1.0);
    set(DesignField::frac_wat, 0.0, 1.0);
    set(DesignField::oil_density, 750.0, 950.0);
    b.profiles = {ChokeProfile::linear, ChokeProfile::convex, ChokeProfile::concave, ChokeProfile::quick_opening};
    return b;
}

void DesignBounds::validate() const {
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        if (!(numeric[i].lower < numeric[i].upper)) {
            throw ConfigError("design bound " + std::string(column_name(design_field_at(i))) +
                              ": lower must be < upper");
        }
    }
    if (profiles.empty()) throw ConfigError("design bounds admit no choke profile");
    const auto& self = *this;
    if (!(self[DesignField::reservoir_pressure].lower > self[DesignField::separator_pressure].upper)) {
        throw ConfigError("design bounds must guarantee p_r > p_s");
    }
    if (!(self[DesignField::reservoir_temperature].lower > self[DesignField::surface_temperature].upper)) {
        throw ConfigError("design bounds must guarantee T_r > T_s");
    }
    const auto& fg = self[DesignField::inflow_gas_fraction];
    if (fg.lower < 0.0 || fg.upper >= 1.0) throw ConfigError("inflow gas fraction bounds must lie in [0,1)");
    const auto& cpr = self[DesignField::critical_pressure_ratio];
    if (cpr.lower <= 0.0 || cpr.upper >= 1.0) throw ConfigError("critical pressure ratio bounds must lie in (0,1)");
}

std::string DesignBounds::violation(const WellDesign& d) const {
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        const auto f = design_field_at(i);
        const double v = d.get(f);
        const auto& b = numeric[i];
        const double tol = 1e-12 * std::max(1.0, std::abs(b.upper));
        if (!(v >= b.lower - tol && v <= b.upper + tol)) {
            return std::string(column_name(f)) + "=" + format_double(v) + " outside [" + format_double(b.lower) +
                   ", " + format_double(b.upper) + "]";
        }
    }
    if (std::find(profiles.begin(), profiles.end(), d.choke_profile) == profiles.end()) {
        return "choke profile " + std::string(to_string(d.choke_profile)) + " not admissible";
    }
    return {};
}

double choke_characteristic(ChokeProfile p, double u) {
    u = std::clamp(u, 0.0, 1.0);
    switch (p) {
    case ChokeProfile::linear: return u;
    case ChokeProfile::convex: return u * u;
    case ChokeProfile::concave: return std::sqrt(u);
    case ChokeProfile::quick_opening: return 1.0 - (1.0 - u) * (1.0 - u);
    }
    return u;
}

Regime classify_regime(double vsg, double vsl, const OracleConstants& c) {
    if (vsg < c.bubbly_max_vsg) return Regime::bubbly;
    if (vsg > c.annular_min_vsg && vsg > c.annular_min_ratio * vsl) return Regime::annular;
    return Regime::slug_churn;
}

WellDesign sample_design(const DesignBounds& bounds, Rng& rng) {
    WellDesign d;
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        d.set(design_field_at(i), rng.uniform(bounds.numeric[i].lower, bounds.numeric[i].upper));
    }
    if (d.frac_gas + d.frac_oil + d.frac_wat <= 0.0) d.frac_oil = 1.0;
    d.renormalize_fractions();
    d.choke_profile = bounds.profiles[rng.index(bounds.profiles.size())];
    return d;
}

namespace {

struct WellState {
    double p_bh = 0, w_liq = 0, w_gas = 0, w_gl = 0, w_gas_total = 0, w_in = 0;
    double t_bh = 0, rho_gas_bh = 0, rho_mix = 0, p_wh = 0, w_choke = 0;
    double area = 0;
};

// Evaluates inflow, tubing and choke relations for a trial bottomhole pressure.
WellState evaluate_state(const WellDesign& d, double u, double w_gl, double p_bh, const OracleConstants& c) {
    WellState s;
    s.p_bh = p_bh;
    s.w_gl = w_gl;
    s.w_liq = d.max_liquid_inflow * std::max(0.0, 1.0 - p_bh / d.reservoir_pressure);
    const double fg = d.inflow_gas_fraction;
    s.w_gas = fg / (1.0 - fg) * s.w_liq;
    s.w_gas_total = s.w_gas + w_gl;
    s.w_in = s.w_liq + s.w_gas_total;
    s.t_bh = d.reservoir_temperature - c.drawdown_dT * (s.w_liq / d.max_liquid_inflow);
    s.rho_gas_bh = p_bh * 1e5 / (d.gas_constant * s.t_bh);
    const double volume_rate = s.w_liq / d.liquid_density + s.w_gas_total / s.rho_gas_bh;
    s.rho_mix = s.w_in > 0.0 ? s.w_in / volume_rate : d.liquid_density;
    s.area = std::numbers::pi * d.tubing_diameter * d.tubing_diameter / 4.0;
    const double v = volume_rate / s.area;
    const double hydro = s.rho_mix * c.gravity * d.tubing_length / 1e5;
    const double friction =
        d.friction_factor * (d.tubing_length / d.tubing_diameter) * s.rho_mix * v * v / (2.0 * 1e5);
    s.p_wh = p_bh - hydro - friction;
    if (s.p_wh > d.separator_pressure) {
        // subcritical below the critical pressure ratio, choked above it
        const double dp = std::min(s.p_wh - d.separator_pressure, (1.0 - d.critical_pressure_ratio) * s.p_wh);
        s.w_choke = d.choke_coefficient * choke_characteristic(d.choke_profile, u) * std::sqrt(s.rho_mix * dp * 1e5);
    }
    return s;
}

double liquid_oil_share(const WellDesign& d) {
    const double liq = d.frac_oil + d.frac_wat;
    return liq > 0.0 ? d.frac_oil / liq : 0.5;
}

} // namespace

OperatingPoint simulate_operating_point(const WellDesign& design, double chk_percent, double qgl,
                                        const OracleConstants& c) {
    if (!(chk_percent >= 0.0 && chk_percent <= 100.0)) throw SimulationError("choke opening outside [0,100]");
    if (!(qgl >= 0.0)) throw SimulationError("negative lift-gas rate");
    if (design.inflow_gas_fraction >= 1.0) throw SimulationError("inflow gas fraction must be < 1");

    const double u = chk_percent / 100.0;
    const double x_oil = liquid_oil_share(design);
    const double f_g = design.inflow_gas_fraction;

    OperatingPoint pt;
    pt.ops.chk = chk_percent;
    pt.ops.pdc = design.separator_pressure;
    pt.ops.fgas = f_g;
    pt.ops.foil = (1.0 - f_g) * x_oil;
    pt.ops.fwat = (1.0 - f_g) * (1.0 - x_oil);

    if (choke_characteristic(design.choke_profile, u) <= 0.0) {
        // Shut in: static liquid column, no lift gas.
        pt.ops.qgl = 0.0;
        pt.targets.pbh = design.reservoir_pressure;
        pt.targets.tbh = design.reservoir_temperature;
        pt.ops.pwh = design.reservoir_pressure - design.liquid_density * c.gravity * design.tubing_length / 1e5;
        pt.ops.twh = design.surface_temperature;
        if (!(pt.ops.pwh > 0.0)) {
            throw SimulationError("shut-in liquid column exceeds reservoir pressure (p_wh=" +
                                  format_double(pt.ops.pwh) + " bar)");
        }
        pt.targets.frbh = static_cast<int>(Regime::bubbly);
        pt.targets.frwh = static_cast<int>(Regime::bubbly);
        return pt;
    }

    double w_gl = gas_lift_mass_rate(qgl, design.gas_constant);
    auto residual = [&](double p) {
        const WellState s = evaluate_state(design, u, w_gl, p, c);
        return s.w_in - s.w_choke;
    };

    double lo = design.separator_pressure;
    double hi = design.reservoir_pressure;
    // Injection is throttled to what the choke passes with the reservoir at zero drawdown.
    double f_hi = residual(hi);
    for (int k = 0; f_hi >= 0.0 && w_gl > 0.0; ++k) {
        qgl = k < 60 ? 0.5 * qgl : 0.0;
        w_gl = gas_lift_mass_rate(qgl, design.gas_constant);
        f_hi = residual(hi);
    }
    const double f_lo = residual(lo);
    if (!(f_lo > 0.0 && f_hi < 0.0)) {
        throw SimulationError("no steady state bracketed in (p_s, p_r): residual(p_s)=" + format_double(f_lo) +
                              " residual(p_r)=" + format_double(f_hi) + " at CHK=" + format_double(chk_percent));
    }
    int it = 0;
    const double tol = 1e-11 * design.reservoir_pressure;
    while (hi - lo > tol) {
        if (++it > c.max_iterations) {
            throw SimulationError("bisection did not converge after " + std::to_string(c.max_iterations) +
                                  " iterations: bracket [" + format_double(lo) + ", " + format_double(hi) + "]");
        }
        const double mid = 0.5 * (lo + hi);
        const double f = residual(mid);
        if (f > 0.0) {
            lo = mid;
        } else if (f < 0.0) {
            hi = mid;
        } else {
            lo = hi = mid;
        }
    }
    const double p_bh = 0.5 * (lo + hi);
    const WellState s = evaluate_state(design, u, w_gl, p_bh, c);
    pt.iterations = it;

    TargetRow& tg = pt.targets;
    tg.woil = s.w_liq * x_oil;
    tg.wwat = s.w_liq - tg.woil;
    tg.wgas = s.w_gas;
    tg.pbh = p_bh;
    tg.tbh = s.t_bh;
    pt.w_gl = w_gl;
    pt.w_tot = ((tg.woil + tg.wwat) + tg.wgas) + w_gl;

    const double heat_capacity_rate = s.w_liq * design.cp_liquid + s.w_gas_total * design.cp_gas;
    const double exponent =
        design.heat_transfer * design.tubing_length * std::numbers::pi * design.tubing_diameter / heat_capacity_rate;
    pt.ops.qgl = qgl;
    pt.ops.pwh = s.p_wh;
    pt.ops.twh = design.surface_temperature + (s.t_bh - design.surface_temperature) * std::exp(-exponent);

    const double rho_gas_wh = s.p_wh * 1e5 / (design.gas_constant * pt.ops.twh);
    pt.vsl_bh = s.w_liq / (design.liquid_density * s.area);
    pt.vsg_bh = s.w_gas_total / (s.rho_gas_bh * s.area);
    pt.vsl_wh = pt.vsl_bh;
    pt.vsg_wh = s.w_gas_total / (rho_gas_wh * s.area);
    tg.frbh = static_cast<int>(classify_regime(pt.vsg_bh, pt.vsl_bh, c));
    tg.frwh = static_cast<int>(classify_regime(pt.vsg_wh, pt.vsl_wh, c));
    return pt;
}

std::vector<ScheduleStep> operating_schedule(std::size_t steps, Rng& rng, const ScheduleOptions& opt) {
    std::vector<ScheduleStep> out(steps);
    double level = rng.bernoulli(0.5) ? 0.0 : rng.uniform(0.2, 1.0) * opt.gas_lift_max;
    const double denom = steps > 1 ? static_cast<double>(steps - 1) : 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double base = opt.chk_min + (opt.chk_max - opt.chk_min) * static_cast<double>(t) / denom;
        const double jitter = rng.uniform(-opt.chk_jitter, opt.chk_jitter);
        if (t > 0 && rng.bernoulli(opt.gas_lift_switch_prob)) {
            level = rng.bernoulli(0.3) ? 0.0 : rng.uniform(0.2, 1.0) * opt.gas_lift_max;
        }
        out[t] = {std::clamp(base + jitter, opt.chk_min, opt.chk_max), level};
    }
    return out;
}

std::string well_id_for(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "W%04zu", index);
    return buf;
}

Portfolio generate_portfolio(std::size_t n_wells, std::size_t steps, const DesignBounds& bounds, std::uint64_t seed,
                             const OracleConstants& c, const ScheduleOptions& opt) {
    if (n_wells < 1) throw ConfigError("portfolio needs at least one well");
    if (steps < 2) throw ConfigError("portfolio wells need at least two steps");
    bounds.validate();

    Portfolio p;
    p.requested = n_wells;
    for (std::size_t i = 0; i < n_wells; ++i) {
        Rng rng(derive_seed(seed, i));
        WellRecord rec;
        rec.well_id = well_id_for(i);
        rec.design = sample_design(bounds, rng);
        const auto schedule = operating_schedule(steps, rng, opt);
        try {
            for (const auto& step : schedule) {
                const OperatingPoint pt = simulate_operating_point(rec.design, step.chk, step.qgl, c);
                rec.ops.push_back(pt.ops);
                rec.targets.push_back(pt.targets);
            }
        } catch (const SimulationError& e) {
            p.failures.push_back({rec.well_id, e.what()});
            continue;
        }
        p.records.push_back(std::move(rec));
    }
    return p;
}

std::string bounds_sidecar_text(const DesignBounds& bounds, std::uint64_t seed, std::size_t n_wells,
                                std::size_t steps) {
    KeyValueMap kv;
    kv["seed"] = std::to_string(seed);
    kv["wells"] = std::to_string(n_wells);
    kv["steps"] = std::to_string(steps);
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        const std::string name(column_name(design_field_at(i)));
        kv["bound." + name + ".lower"] = format_double(bounds.numeric[i].lower);
        kv["bound." + name + ".upper"] = format_double(bounds.numeric[i].upper);
    }
    std::string profiles;
    for (auto pr : bounds.profiles) {
        if (!profiles.empty()) profiles += ';';
        profiles += to_string(pr);
    }
    kv["profiles"] = profiles;
    return "# synthetic portfolio generator settings\n" + to_key_value_text(kv);
}

} // namespace vfm
