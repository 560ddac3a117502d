#include "helpers.hpp"

#include "vfm/errors.hpp"
#include "vfm/training.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace vfm;

TEST_SUITE("training") {

TEST_CASE("cosine schedule") {
    CHECK(cosine_lr(0, 60, 1e-3) == 1e-3);
    CHECK(cosine_lr(60, 60, 1e-3, 1e-5) == doctest::Approx(1e-5));
    CHECK(cosine_lr(30, 60, 1e-3, 1e-5) == doctest::Approx((1e-3 + 1e-5) / 2));
}

TEST_CASE("gradient clipping") {
    std::vector<Mat> g = {Mat(1, 2)};
    g[0] << 3, 4;
    CHECK(clip_gradients(g, 1.0) == doctest::Approx(5.0));
    CHECK(g[0](0, 0) == doctest::Approx(0.6));
    CHECK(g[0](0, 1) == doctest::Approx(0.8));
    std::vector<Mat> small = {Mat::Constant(1, 1, 0.5)};
    clip_gradients(small, 1.0);
    CHECK(small[0](0, 0) == 0.5);

    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        std::vector<Mat> r = {testutil::random_mat(3, 3, rng, 10.0), testutil::random_mat(2, 1, rng, 10.0)};
        clip_gradients(r, 1.0);
        CHECK(std::sqrt(r[0].squaredNorm() + r[1].squaredNorm()) <= 1.0 + 1e-7);
    }
    std::vector<Mat> bad = {Mat::Constant(1, 1, std::nan(""))};
    CHECK_THROWS_AS(clip_gradients(bad, 1.0), TrainingError);
}

TEST_CASE("adamw steps") {
    std::vector<Mat> w = {Mat::Constant(1, 1, 0.7)};
    std::vector<Mat> g = {Mat::Zero(1, 1)};
    AdamState s;
    adamw_step(w, g, s, 0.1, 0.0);
    CHECK(w[0](0, 0) == 0.7);

    w[0](0, 0) = 0.0;
    g[0](0, 0) = 1.0;
    AdamState s1;
    adamw_step(w, g, s1, 0.1, 0.0);
    CHECK(w[0](0, 0) == doctest::Approx(-0.1).epsilon(1e-7));

    w[0](0, 0) = 2.0;
    g[0](0, 0) = 0.0;
    AdamState s2;
    adamw_step(w, g, s2, 0.1, 1.0);
    CHECK(w[0](0, 0) == doctest::Approx(1.8));
}

TEST_CASE("early stopping rule") {
    EarlyStopping es(2, 1e-6);
    const double vals[] = {1.0, 1.1, 1.2, 1.15};
    int stopped_at = -1;
    for (int e = 0; e < 4; ++e) {
        if (es.update(vals[e])) {
            stopped_at = e;
            break;
        }
    }
    CHECK(stopped_at == 3);
    CHECK(es.best_epoch() == 0);

    EarlyStopping tiny(0, 0.1);
    CHECK_FALSE(tiny.update(1.0));
    CHECK(tiny.update(0.95)); // not an improvement beyond the threshold
}

TEST_CASE("fit: zero budget, determinism and leakage guard") {
    const auto& recs = testutil::small_portfolio();
    const std::vector<WellRecord> train(recs.begin(), recs.begin() + 16), val(recs.begin() + 16, recs.begin() + 20);
    const NormStats st = fit_norm_stats(train);
    ModelConfig mc;
    mc.embed_dim = 16;
    mc.head_hidden = 8;
    mc.n_tcn_blocks = 2;

    TrainConfig zero;
    zero.max_epochs = 0;
    Model m0(mc);
    std::vector<Mat> before;
    for (Param* p : m0.parameters()) before.push_back(p->value);
    const TrainHistory h0 = fit(m0, train, val, st, zero, LossWeights{});
    CHECK(h0.epochs.empty());
    const auto after = m0.parameters();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(testutil::bit_equal(after[i]->value, before[i]));

    TrainConfig tc;
    tc.max_epochs = 3;
    tc.patience = 2;
    Model a(mc), b(mc);
    std::ostringstream log;
    const TrainHistory ha = fit(a, train, val, st, tc, LossWeights{}, &log);
    const TrainHistory hb = fit(b, train, val, st, tc, LossWeights{});
    CHECK(ha == hb);
    CHECK(ha.epochs.size() == 3);
    CHECK(log.str().rfind("epoch=0 train_total=", 0) == 0);
    CHECK(log.str().find(" l_phys=") != std::string::npos);
    CHECK(ha.epochs.back().val.total < ha.epochs.front().val.total * 2.0);

    CHECK_THROWS_AS(check_no_leakage(fit_norm_stats(recs), train, val), TrainingError);
    CHECK_NOTHROW(check_no_leakage(st, train, val));

    TrainConfig bad;
    bad.patience = 60;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}
