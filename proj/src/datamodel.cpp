#include "vfm/datamodel.hpp"

#include "vfm/errors.hpp"
#include "vfm/rng.hpp"
#include "vfm/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace vfm {

namespace {

constexpr std::array<std::string_view, kNumChokeProfiles> kProfileNames = {"linear", "convex", "concave",
                                                                           "quick-opening"};

constexpr std::array<std::string_view, kNumDesignNumeric> kDesignColumns = {
    "L",   "D",   "RHO_L", "R_S", "CP_G", "CP_L", "F_D",      "H",        "WL_MAX",   "F_G",
    "K_C", "CPR", "P_R",   "P_S", "T_R",  "T_S",  "FRAC_GAS", "FRAC_OIL", "FRAC_WAT", "RHO_OIL"};

constexpr std::array<std::string_view, kNumOps> kOpColumns = {"CHK", "QGL", "PWH", "PDC",
                                                              "TWH", "FOIL", "FGAS", "FWAT"};

constexpr std::array<std::string_view, kNumTargets> kTargetColumns = {"WOIL", "WWAT", "WGAS", "PBH", "TBH"};

using DesignMember = double WellDesign::*;
constexpr std::array<DesignMember, kNumDesignNumeric> kDesignMembers = {
    &WellDesign::tubing_length,       &WellDesign::tubing_diameter,
    &WellDesign::liquid_density,      &WellDesign::gas_constant,
    &WellDesign::cp_gas,              &WellDesign::cp_liquid,
    &WellDesign::friction_factor,     &WellDesign::heat_transfer,
    &WellDesign::max_liquid_inflow,   &WellDesign::inflow_gas_fraction,
    &WellDesign::choke_coefficient,   &WellDesign::critical_pressure_ratio,
    &WellDesign::reservoir_pressure,  &WellDesign::separator_pressure,
    &WellDesign::reservoir_temperature, &WellDesign::surface_temperature,
    &WellDesign::frac_gas,            &WellDesign::frac_oil,
    &WellDesign::frac_wat,            &WellDesign::oil_density};

using OpMember = double OperationalRow::*;
constexpr std::array<OpMember, kNumOps> kOpMembers = {&OperationalRow::chk,  &OperationalRow::qgl,
                                                      &OperationalRow::pwh,  &OperationalRow::pdc,
                                                      &OperationalRow::twh,  &OperationalRow::foil,
                                                      &OperationalRow::fgas, &OperationalRow::fwat};

using TargetMember = double TargetRow::*;
constexpr std::array<TargetMember, kNumTargets> kTargetMembers = {&TargetRow::woil, &TargetRow::wwat,
                                                                  &TargetRow::wgas, &TargetRow::pbh,
                                                                  &TargetRow::tbh};

constexpr double kStdPressurePa = 101325.0;
constexpr double kStdTemperatureK = 288.15;

} // namespace

std::string_view to_string(ChokeProfile p) { return kProfileNames.at(static_cast<std::size_t>(p)); }

ChokeProfile parse_choke_profile(std::string_view s) {
    for (std::size_t i = 0; i < kProfileNames.size(); ++i) {
        if (kProfileNames[i] == s) return static_cast<ChokeProfile>(i);
    }
    if (s == "quick_opening") return ChokeProfile::quick_opening;
    throw DataError("unknown choke profile '" + std::string(s) + "'");
}

std::string_view column_name(DesignField f) { return kDesignColumns.at(index_of(f)); }

DesignField parse_design_field(std::string_view s) {
    for (std::size_t i = 0; i < kDesignColumns.size(); ++i) {
        if (kDesignColumns[i] == s) return design_field_at(i);
    }
    throw ConfigError("unknown design field '" + std::string(s) + "'");
}

std::string_view column_name(OpField f) { return kOpColumns.at(static_cast<std::size_t>(f)); }
std::string_view column_name(TargetField f) { return kTargetColumns.at(static_cast<std::size_t>(f)); }

double WellDesign::get(DesignField f) const { return this->*kDesignMembers.at(index_of(f)); }
void WellDesign::set(DesignField f, double v) { this->*kDesignMembers.at(index_of(f)) = v; }

std::array<double, kNumDesignNumeric> WellDesign::numeric() const {
    std::array<double, kNumDesignNumeric> out{};
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) out[i] = this->*kDesignMembers[i];
    return out;
}

void WellDesign::set_numeric(std::span<const double> values) {
    if (values.size() != kNumDesignNumeric) throw ShapeError("design numeric vector must have 20 entries");
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) this->*kDesignMembers[i] = values[i];
}

void WellDesign::renormalize_fractions() {
    const double s = frac_gas + frac_oil + frac_wat;
    if (!(s > 0.0)) throw DataError("phase fractions sum to zero");
    frac_gas /= s;
    frac_oil /= s;
    frac_wat /= s;
}

void validate(const WellDesign& d) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw DataError(std::string("design invariant violated: ") + what);
    };
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        if (!std::isfinite(d.get(design_field_at(i)))) {
            throw DataError("design field " + std::string(kDesignColumns[i]) + " is not finite");
        }
    }
    require(d.tubing_length > 0, "L > 0");
    require(d.tubing_diameter > 0, "D > 0");
    require(d.liquid_density > 0, "rho_l > 0");
    require(d.oil_density > 0, "rho_oil > 0");
    require(d.gas_constant > 0, "R_s > 0");
    require(d.cp_gas > 0 && d.cp_liquid > 0, "heat capacities > 0");
    require(d.friction_factor >= 0, "f_D >= 0");
    require(d.heat_transfer >= 0, "h >= 0");
    require(d.max_liquid_inflow > 0, "wl_max > 0");
    require(d.choke_coefficient > 0, "K_c > 0");
    require(d.reservoir_pressure > 0 && d.separator_pressure > 0, "pressures > 0");
    require(d.reservoir_temperature > 0 && d.surface_temperature > 0, "temperatures > 0");
    require(d.inflow_gas_fraction >= 0 && d.inflow_gas_fraction <= 1, "f_g in [0,1]");
    require(d.critical_pressure_ratio > 0 && d.critical_pressure_ratio < 1, "cpr in (0,1)");
    require(d.frac_gas >= 0 && d.frac_oil >= 0 && d.frac_wat >= 0, "phase fractions >= 0");
    require(std::abs(d.frac_gas + d.frac_oil + d.frac_wat - 1.0) <= 1e-9, "phase fractions sum to 1");
    require(d.reservoir_pressure > d.separator_pressure, "p_r > p_s");
    require(d.reservoir_temperature > d.surface_temperature, "T_r > T_s");
}

double OperationalRow::get(OpField f) const { return this->*kOpMembers.at(static_cast<std::size_t>(f)); }
double TargetRow::get(TargetField f) const { return this->*kTargetMembers.at(static_cast<std::size_t>(f)); }

double gas_lift_mass_rate(double qgl_sm3_per_day, double gas_constant) {
    const double rho_std = kStdPressurePa / (gas_constant * kStdTemperatureK);
    return qgl_sm3_per_day * rho_std / 86400.0;
}

// ---------------------------------------------------------------------------
// Normalisation

FeatureId parse_feature_id(std::string_view name) {
    for (std::size_t i = 0; i < kDesignColumns.size(); ++i) {
        if (kDesignColumns[i] == name) return {FeatureGroup::design, i};
    }
    for (std::size_t i = 0; i < kOpColumns.size(); ++i) {
        if (kOpColumns[i] == name) return {FeatureGroup::ops, i};
    }
    for (std::size_t i = 0; i < kTargetColumns.size(); ++i) {
        if (kTargetColumns[i] == name) return {FeatureGroup::target, i};
    }
    throw ConfigError("unknown feature id '" + std::string(name) + "'");
}

const FeatureStats& NormStats::at(FeatureId id) const {
    switch (id.group) {
    case FeatureGroup::design: return design.at(id.index);
    case FeatureGroup::ops: return ops.at(id.index);
    case FeatureGroup::target: return targets.at(id.index);
    }
    throw ConfigError("invalid feature group");
}

void NormStats::require_fitted() const {
    if (!fitted) throw ConfigError("normalisation statistics have not been fitted");
}

namespace {

// Two-pass population statistics.
template <typename Getter>
FeatureStats pooled_stats(std::span<const WellRecord> records, Getter get, double floor) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        for (std::size_t t = 0; t < r.steps(); ++t) {
            sum += get(r, t);
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& r : records) {
        for (std::size_t t = 0; t < r.steps(); ++t) {
            const double d = get(r, t) - mean;
            ss += d * d;
        }
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    return {mean, std::max(sd, floor)};
}

} // namespace

NormStats fit_norm_stats(std::span<const WellRecord> train_records) {
    std::size_t rows = 0;
    for (const auto& r : train_records) rows += r.steps();
    if (train_records.empty() || rows == 0) throw DataError("cannot fit normalisation statistics on empty data");

    NormStats s;
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        const auto m = kDesignMembers[i];
        s.design[i] = pooled_stats(
            train_records, [m](const WellRecord& r, std::size_t) { return r.design.*m; }, s.std_floor);
    }
    for (std::size_t i = 0; i < kNumOps; ++i) {
        const auto m = kOpMembers[i];
        s.ops[i] = pooled_stats(
            train_records, [m](const WellRecord& r, std::size_t t) { return r.ops[t].*m; }, s.std_floor);
    }
    for (std::size_t i = 0; i < kNumTargets; ++i) {
        const auto m = kTargetMembers[i];
        s.targets[i] = pooled_stats(
            train_records, [m](const WellRecord& r, std::size_t t) { return r.targets[t].*m; }, s.std_floor);
    }
    s.fitted = true;
    return s;
}

double zscore(double x, const FeatureStats& s) { return (x - s.mean) / s.std; }
double inverse_zscore(double z, const FeatureStats& s) { return z * s.std + s.mean; }

std::vector<double> zscore(std::span<const double> values, const NormStats& stats, std::string_view feature) {
    const FeatureId id = parse_feature_id(feature);
    stats.require_fitted();
    const FeatureStats& s = stats.at(id);
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double x) { return zscore(x, s); });
    return out;
}

std::vector<double> inverse_zscore(std::span<const double> values, const NormStats& stats,
                                   std::string_view feature) {
    const FeatureId id = parse_feature_id(feature);
    stats.require_fitted();
    const FeatureStats& s = stats.at(id);
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double z) { return inverse_zscore(z, s); });
    return out;
}

std::array<double, kDesignVectorSize> to_design_vector(const WellDesign& design, const NormStats& stats) {
    stats.require_fitted();
    std::array<double, kDesignVectorSize> v{};
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        v[i] = zscore(design.*kDesignMembers[i], stats.design[i]);
    }
    v[kNumDesignNumeric + static_cast<std::size_t>(design.choke_profile)] = 1.0;
    return v;
}

// ---------------------------------------------------------------------------
// Splitting

std::string_view to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + std::string(s) + "'");
}

std::vector<int> quantile_bins(std::span<const double> values, int k) {
    if (k < 1) throw ConfigError("number of bins must be >= 1");
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<int> bins(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        bins[order[rank]] = static_cast<int>(rank * static_cast<std::size_t>(k) / n);
    }
    return bins;
}

namespace {

using StratumLabel = std::array<int, 3>;

struct Stratum {
    StratumLabel label;
    std::vector<std::size_t> wells;
};

// Nearness between composite labels: reservoir-pressure bin first, then the L1
// distance over the remaining bins, then label order.
std::array<int, 2> label_distance(const StratumLabel& a, const StratumLabel& b) {
    return {std::abs(a[0] - b[0]), std::abs(a[1] - b[1]) + std::abs(a[2] - b[2])};
}

void merge_small_strata(std::vector<Stratum>& strata, std::size_t min_size) {
    while (strata.size() > 1) {
        std::size_t smallest = strata.size();
        for (std::size_t i = 0; i < strata.size(); ++i) {
            if (strata[i].wells.size() >= min_size) continue;
            if (smallest == strata.size() || strata[i].wells.size() < strata[smallest].wells.size()) smallest = i;
        }
        if (smallest == strata.size()) return;

        std::size_t target = strata.size();
        std::array<int, 2> best{};
        for (std::size_t j = 0; j < strata.size(); ++j) {
            if (j == smallest) continue;
            const auto d = label_distance(strata[smallest].label, strata[j].label);
            if (target == strata.size() || d < best) {
                best = d;
                target = j;
            }
        }
        auto& dst = strata[target].wells;
        dst.insert(dst.end(), strata[smallest].wells.begin(), strata[smallest].wells.end());
        std::sort(dst.begin(), dst.end());
        strata.erase(strata.begin() + static_cast<std::ptrdiff_t>(smallest));
    }
}

} // namespace

SplitAssignment stratified_split(std::span<const WellRecord> records, SplitFractions fractions, int k,
                                 std::uint64_t seed) {
    const std::array<double, 3> f = {fractions.train, fractions.val, fractions.test};
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    for (double x : f) {
        if (x < 0.0) throw ConfigError("split fractions must be non-negative");
    }
    if (records.size() < 10) throw DataError("stratified split needs at least 10 wells");

    const std::size_t n = records.size();
    std::vector<double> pr(n), dia(n), wl(n);
    for (std::size_t i = 0; i < n; ++i) {
        pr[i] = records[i].design.reservoir_pressure;
        dia[i] = records[i].design.tubing_diameter;
        wl[i] = records[i].design.max_liquid_inflow;
    }
    const auto b_pr = quantile_bins(pr, k);
    const auto b_d = quantile_bins(dia, k);
    const auto b_wl = quantile_bins(wl, k);

    std::map<StratumLabel, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < n; ++i) by_label[{b_pr[i], b_d[i], b_wl[i]}].push_back(i);
    std::vector<Stratum> strata;
    for (auto& [label, wells] : by_label) strata.push_back({label, std::move(wells)});
    merge_small_strata(strata, 3);
    std::sort(strata.begin(), strata.end(), [](const Stratum& a, const Stratum& b) { return a.label < b.label; });

    // Shuffle within strata, then walk the stratum-ordered sequence handing each well
    // to the split with the largest allocation deficit. Every prefix (and so every
    // stratum) stays within one well of its proportional share, and totals are exact
    // whenever n * fraction is integral.
    Rng rng(seed);
    std::vector<std::size_t> sequence;
    sequence.reserve(n);
    for (auto& s : strata) {
        rng.shuffle(s.wells);
        sequence.insert(sequence.end(), s.wells.begin(), s.wells.end());
    }

    SplitAssignment out;
    std::array<std::size_t, 3> count{};
    for (std::size_t m = 0; m < sequence.size(); ++m) {
        std::size_t pick = 0;
        double best = -INFINITY;
        for (std::size_t s = 0; s < 3; ++s) {
            const double deficit = f[s] * static_cast<double>(m + 1) - static_cast<double>(count[s]);
            if (deficit > best + 1e-12) {
                best = deficit;
                pick = s;
            }
        }
        ++count[pick];
        out[records[sequence[m]].well_id] = static_cast<Split>(pick);
    }
    if (out.size() != n) throw DataError("duplicate well ids in stratified split input");
    return out;
}

std::vector<WellRecord> select_split(std::span<const WellRecord> records, const SplitAssignment& assignment,
                                     Split which) {
    std::vector<WellRecord> out;
    for (const auto& r : records) {
        auto it = assignment.find(r.well_id);
        if (it == assignment.end()) throw DataError("well '" + r.well_id + "' has no split assignment");
        if (it->second == which) out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> portfolio_csv_header() {
    std::vector<std::string> h;
    h.emplace_back("WELL_ID");
    for (auto c : kOpColumns) h.emplace_back(c);
    for (auto c : kTargetColumns) h.emplace_back(c);
    h.emplace_back("FRBH");
    h.emplace_back("FRWH");
    for (auto c : kDesignColumns) h.emplace_back(c);
    h.emplace_back("CHOKE_PROFILE");
    return h;
}

void write_portfolio_csv(std::ostream& out, std::span<const WellRecord> records) {
    const auto header = portfolio_csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& r : records) {
        if (r.ops.size() != r.targets.size()) throw DataError("well '" + r.well_id + "': ops/targets length mismatch");
        const auto numeric = r.design.numeric();
        std::string design_tail;
        for (double v : numeric) {
            design_tail += ',';
            design_tail += format_double(v);
        }
        design_tail += ',';
        design_tail += to_string(r.design.choke_profile);
        for (std::size_t t = 0; t < r.steps(); ++t) {
            out << r.well_id;
            for (auto m : kOpMembers) out << ',' << format_double(r.ops[t].*m);
            for (auto m : kTargetMembers) out << ',' << format_double(r.targets[t].*m);
            out << ',' << r.targets[t].frbh << ',' << r.targets[t].frwh << design_tail << '\n';
        }
    }
}

void write_portfolio_csv(const std::string& path, std::span<const WellRecord> records) {
    std::ostringstream ss;
    write_portfolio_csv(ss, records);
    write_file(path, ss.str());
}

std::vector<WellRecord> read_portfolio_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("portfolio CSV is empty");
    const auto header = split_csv_line(line);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    auto require_col = [&](std::string_view name) {
        auto it = col.find(std::string(name));
        if (it == col.end()) throw DataError("portfolio CSV missing column " + std::string(name));
        return it->second;
    };

    const std::size_t c_id = require_col("WELL_ID");
    std::array<std::size_t, kNumOps> c_ops{};
    for (std::size_t i = 0; i < kNumOps; ++i) c_ops[i] = require_col(kOpColumns[i]);
    std::array<std::size_t, kNumTargets> c_tg{};
    for (std::size_t i = 0; i < kNumTargets; ++i) c_tg[i] = require_col(kTargetColumns[i]);
    const std::size_t c_frbh = require_col("FRBH");
    const std::size_t c_frwh = require_col("FRWH");
    std::array<std::size_t, kNumDesignNumeric> c_des{};
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) c_des[i] = require_col(kDesignColumns[i]);
    const std::size_t c_prof = require_col("CHOKE_PROFILE");

    std::vector<WellRecord> wells;
    std::unordered_map<std::string, std::size_t> index;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() < header.size()) {
            throw DataError("portfolio CSV line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " cells");
        }
        const std::string& id = cells[c_id];
        auto [it, inserted] = index.try_emplace(id, wells.size());
        if (inserted) {
            WellRecord rec;
            rec.well_id = id;
            for (std::size_t i = 0; i < kNumDesignNumeric; ++i) rec.design.*kDesignMembers[i] = parse_double(cells[c_des[i]]);
            rec.design.choke_profile = parse_choke_profile(cells[c_prof]);
            wells.push_back(std::move(rec));
        }
        WellRecord& rec = wells[it->second];

        OperationalRow op;
        for (std::size_t i = 0; i < kNumOps; ++i) op.*kOpMembers[i] = parse_double(cells[c_ops[i]]);
        const double fsum = op.foil + op.fgas + op.fwat;
        if (!(fsum > 0.0) || std::abs(fsum - 1.0) > 1e-3) {
            throw DataError("portfolio CSV line " + std::to_string(lineno) + ": phase fractions sum to " +
                            format_double(fsum));
        }
        if (std::abs(fsum - 1.0) > 1e-9) {
            op.foil /= fsum;
            op.fgas /= fsum;
            op.fwat /= fsum;
        }
        if (op.chk < 0.0 || op.chk > 100.0) {
            throw DataError("portfolio CSV line " + std::to_string(lineno) + ": CHK outside [0,100]");
        }

        TargetRow tg;
        for (std::size_t i = 0; i < kNumTargets; ++i) tg.*kTargetMembers[i] = parse_double(cells[c_tg[i]]);
        tg.frbh = static_cast<int>(parse_int(cells[c_frbh]));
        tg.frwh = static_cast<int>(parse_int(cells[c_frwh]));
        if (tg.frbh < 0 || tg.frbh > 2 || tg.frwh < 0 || tg.frwh > 2) {
            throw DataError("portfolio CSV line " + std::to_string(lineno) + ": regime label outside {0,1,2}");
        }
        rec.ops.push_back(op);
        rec.targets.push_back(tg);
    }
    for (auto& w : wells) {
        // Fractions in files may be rounded; repair before validating.
        const double s = w.design.frac_gas + w.design.frac_oil + w.design.frac_wat;
        if (std::abs(s - 1.0) > 1e-9) w.design.renormalize_fractions();
        try {
            validate(w.design);
        } catch (const DataError& e) {
            throw DataError("well '" + w.well_id + "': " + e.what());
        }
    }
    return wells;
}

std::vector<WellRecord> read_portfolio_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open portfolio CSV '" + path + "'");
    return read_portfolio_csv(in);
}

} // namespace vfm
