#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include <shadowcast/csv.hpp>
#include <shadowcast/harness.hpp>

using namespace shadowcast;

namespace {

TrialResult hit(Point2 truth, Point2 est, double r_true, double r_hat) {
    TrialResult t;
    t.theta_true = truth;
    t.theta_hat = est;
    t.r_true = r_true;
    t.r_hat = r_hat;
    return t;
}

TrialResult miss() {
    TrialResult t;
    t.outage = true;
    return t;
}

bool same(const TrialResult& a, const TrialResult& b) {
    return a.trial == b.trial && a.seed == b.seed && a.theta_true == b.theta_true && a.r_true == b.r_true &&
           a.theta_hat == b.theta_hat && a.r_hat == b.r_hat && a.outage == b.outage && a.n_blocked == b.n_blocked &&
           a.n_nonblocked == b.n_nonblocked && a.alpha_final == b.alpha_final;
}

}  // namespace

TEST(Seeds, CounterDerivedAndDistinct) {
    EXPECT_EQ(derive_seed(1, 0), derive_seed(1, 0));
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    // Reference splitmix64 output for state 0.
    EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, UniformAndNormalMoments) {
    Rng rng(123);
    double s = 0, s2 = 0, n1 = 0, n2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        s += u;
        s2 += u * u;
        const double z = rng.normal();
        n1 += z;
        n2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.5, 0.005);
    EXPECT_NEAR(s2 / n - 0.25, 1.0 / 12.0, 0.002);
    EXPECT_NEAR(n1 / n, 0.0, 0.01);
    EXPECT_NEAR(n2 / n, 1.0, 0.01);
}

TEST(SampleObject, RespectsMarginAndRadiusFloor) {
    ScenarioConfig cfg;
    cfg.prior = {0.02, 0.05};  // many negative Gaussian draws
    for (std::uint64_t s = 0; s < 500; ++s) {
        Rng rng(s);
        const auto obj = sample_object(cfg, rng);
        EXPECT_GT(obj.radius, 0.01);
        EXPECT_GE(obj.center.x, 0.5);
        EXPECT_LE(obj.center.x, 4.5);
        EXPECT_GE(obj.center.y, 0.5);
        EXPECT_LE(obj.center.y, 4.5);
    }
}

TEST(RunTrial, FixedSeedIsDeterministic) {
    ScenarioConfig cfg;
    cfg.num_ue = 20;
    const auto a = run_trial(cfg, 4242, 7), b = run_trial(cfg, 4242, 7);
    EXPECT_TRUE(same(a, b));
    EXPECT_EQ(a.trial, 7u);
    EXPECT_EQ(a.n_blocked + a.n_nonblocked, 20u * 25u);

    cfg.estimator = Estimator::ML;
    cfg.ml_resolution = 0.05;
    EXPECT_TRUE(same(run_trial(cfg, 4242), run_trial(cfg, 4242)));
}

TEST(RunTrial, ObjectAwayFromLinksIsOutage) {
    ScenarioConfig cfg;
    cfg.grid_L = 1;
    cfg.num_ue = 5;
    cfg.object.center = Point2{0.0, 5.0};
    cfg.object.radius = 0.01;
    const auto t = run_trial(cfg, 31);
    EXPECT_TRUE(t.outage);
    EXPECT_FALSE(t.theta_hat);
    EXPECT_FALSE(t.r_hat);
    EXPECT_FALSE(t.alpha_final);
    EXPECT_EQ(t.n_blocked, 0u);
}

TEST(RunTrial, SamplingExhaustedPropagates) {
    ScenarioConfig cfg;
    cfg.num_ue = 200;
    cfg.ue_dmin = 1.0;
    EXPECT_THROW(run_trial(cfg, 1), SamplingExhausted);
}

TEST(RunTrial, MmseTypicalErrorFiveByFive) {
    ScenarioConfig cfg;
    cfg.num_ue = 30;
    std::vector<double> err;
    for (std::uint64_t k = 0; k < 60; ++k) {
        const auto t = run_trial(cfg, derive_seed(9, k));
        if (!t.outage) err.push_back(distance(*t.theta_hat, t.theta_true));
    }
    std::sort(err.begin(), err.end());
    EXPECT_LE(err[err.size() / 2], 0.05);
}

TEST(Aggregate, ExactEstimatesGiveZero) {
    std::vector<TrialResult> t{hit({1, 1}, {1, 1}, 0.1, 0.1), hit({2, 3}, {2, 3}, 0.2, 0.2), miss()};
    const auto m = aggregate(t);
    EXPECT_EQ(m.rmse_theta, 0.0);
    EXPECT_EQ(m.rmse_r, 0.0);
    EXPECT_EQ(m.trials, 3u);
    EXPECT_EQ(m.trials_used, 2u);
    EXPECT_DOUBLE_EQ(m.outage_prob, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.outage_stderr, std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 3.0));
}

TEST(Aggregate, HandComputedRmse) {
    // Squared errors 0.09, 0.16, 0.01 (centre) and 0.0001, 0.0004, 0.0009 (radius).
    std::vector<TrialResult> t{hit({0, 0}, {0.3, 0}, 0.1, 0.11), hit({0, 0}, {0, 0.4}, 0.1, 0.12),
                               hit({1, 1}, {1.1, 1}, 0.1, 0.13), miss()};
    const auto m = aggregate(t);
    EXPECT_NEAR(m.rmse_theta, std::sqrt(0.26 / 3.0), 1e-15);
    EXPECT_NEAR(m.rmse_r, std::sqrt(0.0014 / 3.0), 1e-15);
    EXPECT_DOUBLE_EQ(m.outage_prob, 0.25);

    const double mean = 0.26 / 3.0;
    const double var = ((0.09 - mean) * (0.09 - mean) + (0.16 - mean) * (0.16 - mean) +
                        (0.01 - mean) * (0.01 - mean)) / 2.0;
    EXPECT_NEAR(m.rmse_theta_stderr, std::sqrt(var / 3.0) / (2.0 * std::sqrt(mean)), 1e-12);
}

TEST(Sweep, ParsesVariables) {
    EXPECT_EQ(parse_sweep_var("num_ue"), SweepVar::NumUe);
    EXPECT_EQ(parse_sweep_var("radius"), SweepVar::Radius);
    EXPECT_EQ(parse_sweep_var("grid_L"), SweepVar::GridL);
    EXPECT_FALSE(parse_sweep_var("height"));

    ScenarioConfig cfg;
    EXPECT_EQ(with_sweep_value(cfg, SweepVar::NumUe, 40).num_ue, 40u);
    EXPECT_EQ(with_sweep_value(cfg, SweepVar::GridL, 2).grid_L, 2);
    EXPECT_EQ(with_sweep_value(cfg, SweepVar::Radius, 0.3).object.radius, 0.3);
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
    try {
        parallel_for(100, 4, [](std::size_t i) {
            if (i == 17 || i == 63) throw std::runtime_error(std::to_string(i));
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "17");
    }
}

TEST(MonteCarlo, WorkerCountInvariantAndRecomputable) {
    ScenarioConfig cfg;
    cfg.trials = 40;
    cfg.seed = 2024;
    const std::vector<double> values{5, 15};
    const auto one = run_monte_carlo(cfg, SweepVar::NumUe, values, 1);
    const auto four = run_monte_carlo(cfg, SweepVar::NumUe, values, 4);

    std::ostringstream a, b;
    write_trials_csv(a, one);
    write_metrics_csv(a, one);
    write_trials_csv(b, four);
    write_metrics_csv(b, four);
    EXPECT_EQ(a.str(), b.str());

    for (std::size_t p = 0; p < one.size(); ++p) {
        EXPECT_EQ(one[p].metrics.num_ue, static_cast<std::size_t>(values[p]));
        for (std::size_t k = 0; k < cfg.trials; ++k) {
            EXPECT_EQ(one[p].trials[k].trial, p * cfg.trials + k);
            EXPECT_EQ(one[p].trials[k].seed, derive_seed(cfg.seed, p * cfg.trials + k));
        }
        // Metrics from the persisted records match the in-memory aggregation exactly.
        std::ostringstream os;
        write_trials_csv(os, one[p].trials);
        std::istringstream is(os.str());
        const auto back = aggregate(read_trials_csv(is));
        EXPECT_EQ(back.rmse_theta, one[p].metrics.rmse_theta);
        EXPECT_EQ(back.rmse_r, one[p].metrics.rmse_r);
        EXPECT_EQ(back.outage_prob, one[p].metrics.outage_prob);
        EXPECT_EQ(back.rmse_theta_stderr, one[p].metrics.rmse_theta_stderr);
    }
}

TEST(MonteCarlo, OutageFallsWithRadius) {
    ScenarioConfig cfg;
    cfg.num_ue = 10;
    cfg.trials = 300;
    const auto pts = run_monte_carlo(cfg, SweepVar::Radius, {0.05, 0.3}, 1);
    const auto& small = pts[0].metrics;
    const auto& large = pts[1].metrics;
    EXPECT_GT(small.outage_prob, large.outage_prob);
    EXPECT_LE(large.outage_prob, small.outage_prob + 3 * std::hypot(small.outage_stderr, large.outage_stderr));
}
