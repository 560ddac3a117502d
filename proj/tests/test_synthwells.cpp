#include "helpers.hpp"

#include "vfm/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace vfm;

TEST_SUITE("synthwells") {

TEST_CASE("sample_design respects bounds") {
    const DesignBounds b = DesignBounds::defaults();
    Rng rng(1);
    double sum_d = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const WellDesign d = sample_design(b, rng);
        CHECK(d.reservoir_pressure > d.separator_pressure);
        CHECK(b.violation(d).empty());
        CHECK(d.frac_gas + d.frac_oil + d.frac_wat == doctest::Approx(1.0).epsilon(1e-12));
        sum_d += d.tubing_diameter;
    }
    const double se = (0.20 - 0.05) / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum_d / n - 0.125) < 3.0 * se);
}

TEST_CASE("degenerate bounds pin the design") {
    DesignBounds b = DesignBounds::defaults();
    b[DesignField::tubing_length] = {500.0 - 1e-9, 500.0};
    Rng rng(2);
    const WellDesign d = sample_design(b, rng);
    CHECK(d.tubing_length == doctest::Approx(500.0).epsilon(1e-11));
}

TEST_CASE("closed choke shuts the well in") {
    const WellDesign d = testutil::small_portfolio().front().design;
    const OperatingPoint pt = simulate_operating_point(d, 0.0, 1000.0);
    CHECK(pt.targets.woil == 0.0);
    CHECK(pt.targets.wwat == 0.0);
    CHECK(pt.targets.wgas == 0.0);
    CHECK(pt.w_tot == 0.0);
    CHECK(pt.targets.pbh <= d.reservoir_pressure);
}

TEST_CASE("converged points are bracketed and the choke sweep is monotone") {
    for (const auto& r : testutil::small_portfolio()) {
        double prev = -1.0;
        for (double chk = 10.0; chk <= 90.0; chk += 5.0) {
            const OperatingPoint pt = simulate_operating_point(r.design, chk, 0.0);
            CHECK(pt.targets.pbh > r.design.separator_pressure);
            CHECK(pt.targets.pbh < r.design.reservoir_pressure);
            CHECK(pt.w_tot >= prev);
            prev = pt.w_tot;
        }
    }
}

TEST_CASE("doubling the choke coefficient raises total flow at half opening") {
    for (const auto& r : testutil::small_portfolio()) {
        WellDesign d = r.design;
        const double a = simulate_operating_point(d, 50.0, 0.0).w_tot;
        d.choke_coefficient *= 2.0;
        const double b = simulate_operating_point(d, 50.0, 0.0).w_tot;
        CHECK(b > a);
    }
}

TEST_CASE("generated rows obey the physics and the labels reproduce") {
    for (const auto& r : testutil::small_portfolio()) {
        for (std::size_t t = 0; t < r.steps(); ++t) {
            const auto& o = r.ops[t];
            const auto& y = r.targets[t];
            CHECK(y.woil >= 0.0);
            CHECK(y.wwat >= 0.0);
            CHECK(y.wgas >= 0.0);
            CHECK(y.pbh > o.pwh);
            CHECK(y.tbh > o.twh);
            const OperatingPoint again = simulate_operating_point(r.design, o.chk, o.qgl);
            CHECK(again.targets == y);
        }
    }
}

TEST_CASE("portfolio determinism") {
    const auto a = generate_portfolio(1, 2, DesignBounds::defaults(), 42);
    const auto b = generate_portfolio(1, 2, DesignBounds::defaults(), 42);
    std::ostringstream sa, sb;
    write_portfolio_csv(sa, a.records);
    write_portfolio_csv(sb, b.records);
    CHECK(sa.str() == sb.str());
    CHECK(a.records.size() == 1);
    CHECK_THROWS_AS(generate_portfolio(0, 2, DesignBounds::defaults(), 42), ConfigError);
    // a well's content does not depend on the portfolio size
    const auto c = generate_portfolio(3, 2, DesignBounds::defaults(), 42);
    CHECK(c.records.front() == a.records.front());
}

TEST_CASE("regime classification thresholds") {
    const OracleConstants c;
    CHECK(classify_regime(0.1, 1.0, c) == Regime::bubbly);
    CHECK(classify_regime(2.0, 1.0, c) == Regime::slug_churn);
    CHECK(classify_regime(20.0, 1.0, c) == Regime::annular);
    CHECK(classify_regime(20.0, 5.0, c) == Regime::slug_churn);
}

TEST_CASE("choke characteristics") {
    for (auto p : {ChokeProfile::linear, ChokeProfile::convex, ChokeProfile::concave, ChokeProfile::quick_opening}) {
        CHECK(choke_characteristic(p, 0.0) == doctest::Approx(0.0));
        CHECK(choke_characteristic(p, 1.0) == doctest::Approx(1.0));
    }
    CHECK(choke_characteristic(ChokeProfile::convex, 0.2) < choke_characteristic(ChokeProfile::linear, 0.2));
}

}
