#include "helpers.hpp"

#include "vfm/designopt.hpp"
#include "vfm/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace vfm;

namespace {

struct Fixture {
    std::vector<WellRecord> recs = testutil::small_portfolio();
    NormStats stats = fit_norm_stats(recs);
    DesignBounds bounds = population_bounds(recs);
    Model model{[] {
        ModelConfig c;
        c.embed_dim = 16;
        c.head_hidden = 8;
        c.n_tcn_blocks = 2;
        return c;
    }()};
    std::vector<Scenario> scenarios = representative_scenarios(recs, 3);
};

OptimizationOptions quick_options() {
    OptimizationOptions o;
    o.presample = 20;
    o.n_weights = 3;
    o.simplex_step = 0.5;
    o.de.pop_size = 8;
    o.de.generations = 4;
    o.de.seed = 5;
    return o;
}

bool internally_non_dominated(const std::vector<ParetoPoint>& f, bool with_c) {
    for (const auto& a : f)
        for (const auto& b : f)
            if (dominates(a.objectives, b.objectives, with_c)) return false;
    return true;
}

} // namespace

TEST_SUITE("designopt") {

TEST_CASE("complexity endpoints") {
    const DesignBounds b = DesignBounds::defaults();
    WellDesign d = testutil::small_portfolio().front().design;
    const DesignField drivers[] = {DesignField::tubing_diameter, DesignField::tubing_length,
                                   DesignField::max_liquid_inflow, DesignField::choke_coefficient};
    for (auto f : drivers) d.set(f, b[f].lower);
    d.choke_profile = ChokeProfile::linear;
    CHECK(complexity(d, b) == 0.0);
    for (auto f : drivers) d.set(f, b[f].upper);
    d.choke_profile = ChokeProfile::concave;
    CHECK(complexity(d, b) == 1.0);
    for (auto f : drivers) d.set(f, b[f].mid());
    d.choke_profile = ChokeProfile::linear;
    CHECK(complexity(d, b) == doctest::Approx(0.45).epsilon(1e-14));
}

TEST_CASE("pareto filter") {
    auto pt = [](double oil, double slug) { return ParetoPoint{WellDesign{}, ObjectiveValues{oil, slug}, {}}; };
    const auto f = pareto_filter({pt(10, 0.2), pt(12, 0.1), pt(8, 0.3)}, false);
    REQUIRE(f.size() == 1);
    CHECK(f[0].objectives.mean_oil == 12);
    CHECK(pareto_filter({pt(1, 1)}, false).size() == 1);
    CHECK(pareto_filter({pt(10, 0.1), pt(12, 0.2)}, false).size() == 2);
    ObjectiveValues a{10, 0.1, 0.5}, b{10, 0.1, 0.2};
    CHECK(dominates(b, a, true));
    CHECK_FALSE(dominates(b, a, false));
}

TEST_CASE("differential evolution") {
    auto sphere = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    };
    const Box box(5, {-5.0, 5.0});
    DeOptions o;
    o.generations = 100;
    const DeResult r = differential_evolution(sphere, box, o);
    CHECK(r.best_value < 1e-3);
    CHECK(r.trace.size() == 101);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
    const DeResult again = differential_evolution(sphere, box, o);
    CHECK(again.best == r.best);

    o.generations = 0;
    const DeResult init = differential_evolution(sphere, box, o);
    CHECK(init.best_value == *std::min_element(init.fitness.begin(), init.fitness.end()));
    for (const auto& x : init.population)
        for (std::size_t d = 0; d < 5; ++d) CHECK((x[d] >= -5.0 && x[d] <= 5.0));

    o.pop_size = 3;
    CHECK_THROWS_AS(differential_evolution(sphere, box, o), ConfigError);
}

TEST_CASE("genome decoding") {
    std::vector<double> g(21, 0.0);
    const DesignBounds b = DesignBounds::defaults();
    for (std::size_t i = 0; i < 20; ++i) g[i] = b.numeric[i].mid();
    g[20] = 4.0;
    CHECK(decode_design(g).choke_profile == ChokeProfile::quick_opening);
    g[20] = 2.7;
    const WellDesign d = decode_design(g);
    CHECK(d.choke_profile == ChokeProfile::concave);
    CHECK(d.frac_gas + d.frac_oil + d.frac_wat == doctest::Approx(1.0));
    CHECK(decode_design(encode_design(d)) == d);
    CHECK(design_box(b).size() == 21);
}

TEST_CASE("simplex weights and percentile") {
    const auto w = simplex_weights(0.2);
    CHECK(w.size() == 21);
    for (const auto& t : w) CHECK(t[0] + t[1] + t[2] == doctest::Approx(1.0));
    CHECK(simplex_weights(1.0).size() == 3);
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(i);
    CHECK(percentile(v, 95.0) == doctest::Approx(95.05).epsilon(1e-14));
    CHECK(percentile(v, 0.0) == 1.0);
    CHECK(percentile(v, 100.0) == 100.0);
}

TEST_CASE("baseline designs") {
    const std::vector<WellRecord> same(5, testutil::small_portfolio().front());
    const BaselineDesigns b = baseline_designs(same);
    const WellDesign& d = same.front().design;
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) {
        CHECK(b.p95.get(design_field_at(i)) == doctest::Approx(d.get(design_field_at(i))).epsilon(1e-12));
        CHECK(b.mean.get(design_field_at(i)) == doctest::Approx(d.get(design_field_at(i))).epsilon(1e-12));
    }
    CHECK(b.mean.choke_profile == d.choke_profile);
    const BaselineDesigns m = baseline_designs(testutil::small_portfolio());
    CHECK(m.mean.frac_gas + m.mean.frac_oil + m.mean.frac_wat == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.p95.choke_profile == ChokeProfile::linear);
}

TEST_CASE("surrogate evaluation") {
    Fixture fx;
    ModelSurrogate s(fx.model, fx.stats, fx.scenarios, fx.bounds);
    const WellDesign d = fx.recs[3].design;
    const ObjectiveValues o = s.evaluate(d);
    CHECK(o.mean_slug >= 0.0);
    CHECK(o.mean_slug <= 1.0);
    CHECK(std::isnan(o.complexity));

    auto dup = fx.scenarios;
    dup.insert(dup.end(), fx.scenarios.begin(), fx.scenarios.end());
    ModelSurrogate s2(fx.model, fx.stats, dup, fx.bounds);
    const ObjectiveValues o2 = s2.evaluate(d);
    CHECK(o2.mean_oil == doctest::Approx(o.mean_oil).epsilon(1e-12));
    CHECK(o2.mean_slug == doctest::Approx(o.mean_slug).epsilon(1e-12));

    std::vector<WellDesign> batch;
    for (std::size_t i = 0; i < 64; ++i) batch.push_back(fx.recs[i % fx.recs.size()].design);
    const auto many = evaluate_designs(s, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ObjectiveValues one = evaluate_design(fx.model, fx.stats, batch[i], fx.scenarios, fx.bounds);
        CHECK(many[i].mean_oil == one.mean_oil);
        CHECK(many[i].mean_slug == one.mean_slug);
    }

    WellDesign out = d;
    out.tubing_length = fx.bounds[DesignField::tubing_length].upper + 1.0;
    CHECK_THROWS_AS(s.evaluate(out), DataError);

    ModelConfig nr;
    nr.use_regime = false;
    Model no_reg(nr);
    CHECK_THROWS_AS(ModelSurrogate(no_reg, fx.stats, fx.scenarios, fx.bounds), ConfigError);
}

TEST_CASE("bi-objective search") {
    Fixture fx;
    ModelSurrogate s(fx.model, fx.stats, fx.scenarios, fx.bounds);
    const OptimizationOptions opt = quick_options();
    const OptimizationResult r = optimize_biobjective(s, fx.bounds, opt);
    CHECK_FALSE(r.front.empty());
    CHECK(internally_non_dominated(r.front, false));
    REQUIRE(r.subproblem_bests.size() == 3);
    CHECK(r.subproblem_bests.front().weights[0] == 0.0);
    CHECK(r.subproblem_bests.back().weights[0] == 1.0);

    // weight collapse: the w=0 and w=1 sub-problems agree with single-objective runs
    const Box box = design_box(fx.bounds);
    DeOptions de = opt.de;
    de.seed = derive_seed(opt.de.seed, 1);
    const DeResult slug = differential_evolution(
        [&](std::span<const double> g) { return s.evaluate(decode_design(g)).mean_slug; }, box, de);
    CHECK(r.subproblem_bests.front().objectives.mean_slug == doctest::Approx(slug.best_value).epsilon(1e-12));
    de.seed = derive_seed(opt.de.seed, 3);
    const DeResult oil = differential_evolution(
        [&](std::span<const double> g) { return -s.evaluate(decode_design(g)).mean_oil; }, box, de);
    CHECK(r.subproblem_bests.back().objectives.mean_oil == doctest::Approx(-oil.best_value).epsilon(1e-12));

    const OptimizationResult again = optimize_biobjective(s, fx.bounds, opt);
    CHECK(front_csv(again.front, false) == front_csv(r.front, false));
}

TEST_CASE("tri-objective search") {
    Fixture fx;
    ModelSurrogate s(fx.model, fx.stats, fx.scenarios, fx.bounds);
    OptimizationOptions opt = quick_options();
    opt.de.pop_size = 16;
    opt.de.generations = 40;
    const OptimizationResult r = optimize_triobjective(s, fx.bounds, opt);
    CHECK(r.subproblem_bests.size() == 6);
    CHECK(internally_non_dominated(r.front, true));
    for (const auto& p : r.subproblem_bests) {
        if (p.weights[2] == 1.0) CHECK(p.objectives.complexity < 0.1);
    }
    const std::string csv = front_csv(r.front, true);
    CHECK(csv.rfind("w_oil,w_slug,w_complexity,", 0) == 0);
}

TEST_CASE("sensitivity sweeps") {
    Fixture fx;
    for (Param* p : fx.model.parameters()) p->value.setZero();
    ModelSurrogate s(fx.model, fx.stats, fx.scenarios, fx.bounds);
    const WellDesign base = fx.recs[0].design;
    const auto flat = sensitivity_sweep(s, base, DesignField::tubing_diameter, 7, fx.bounds);
    REQUIRE(flat.size() == 7);
    for (const auto& p : flat) {
        CHECK(p.mean_oil == flat.front().mean_oil);
        CHECK(p.mean_slug == flat.front().mean_slug);
    }
    const auto fr = sensitivity_sweep(s, base, DesignField::frac_oil, 4, fx.bounds);
    CHECK(fr.size() == 4);

    OracleSurrogate oracle(fx.scenarios);
    const auto kc = sensitivity_sweep(oracle, base, DesignField::choke_coefficient, 6, fx.bounds);
    for (std::size_t i = 1; i < kc.size(); ++i) CHECK(kc[i].mean_oil >= kc[i - 1].mean_oil);
    CHECK(sensitivity_csv(DesignField::choke_coefficient, kc).rfind("field,value,W_OIL,P_slug\n", 0) == 0);
}

TEST_CASE("integrity map") {
    CHECK(classify_risk(0.1) == RiskCategory::low);
    CHECK(classify_risk(0.100001) == RiskCategory::moderate);
    CHECK(classify_risk(0.5) == RiskCategory::moderate);
    CHECK(classify_risk(0.51) == RiskCategory::high);

    const auto& recs = testutil::small_portfolio();
    const SlugProbability never = [](const WellRecord& r) { return Vec::Zero(static_cast<Eigen::Index>(r.steps())); };
    for (const auto& e : integrity_map(recs, never)) CHECK(e.category == RiskCategory::low);

    Mat forced(2, 3);
    forced << 0, -std::numeric_limits<double>::infinity(), 0, 0, -1e308, 0;
    CHECK(slug_probability_from_logits(forced).maxCoeff() == 0.0);
    CHECK(slug_probability_from_logits(Mat::Zero(1, 3))(0) == doctest::Approx(1.0 / 3.0));

    Fixture fx;
    const auto entries = integrity_map(fx.recs, model_slug_probability(fx.model, fx.stats));
    std::array<int, 3> counts{};
    for (const auto& e : entries) ++counts[static_cast<std::size_t>(e.category)];
    CHECK(counts[0] + counts[1] + counts[2] == static_cast<int>(fx.recs.size()));
    CHECK(integrity_csv(entries).rfind("well_id,mean_slug_probability,category\n", 0) == 0);
}

}
