#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <shadowcast/likelihood.hpp>

#include "oracles.hpp"

using namespace shadowcast;

namespace {

const RadiusPrior kPrior{0.13, 0.03};

LinkLine blocked(Point2 a, Point2 b) { return link_through(a, b, LinkKind::Blocked); }
LinkLine clear(Point2 a, Point2 b) { return link_through(a, b, LinkKind::NonBlocked); }

// Brute-force argmax with the same (x, y) tie rule, written independently of
// the library's scan.
double oracle_loglik(const ObservationSet& obs, Point2 p) {
    auto z = [](const LinkLine& l, Point2 q) { return (std::abs(dot(l.n, q) - l.beta) - 0.13) / 0.03; };
    double v = 0.0;
    for (const auto& l : obs.blocked) v += std::log(0.5 * std::erfc(z(l, p) / std::sqrt(2.0)));
    for (const auto& l : obs.nonblocked) v += std::log(0.5 * std::erfc(-z(l, p) / std::sqrt(2.0)));
    return v;
}

// Brute-force argmax with the same (x, y) tie rule, written independently of
// the library's scan.
Point2 brute_argmax(const ObservationSet& obs, const GridSpec& g) {
    Point2 best{};
    double bv = -INFINITY;
    for (std::size_t i = 0; i < g.nx(); ++i)
        for (std::size_t j = 0; j < g.ny(); ++j) {
            const Point2 p = g.at(i, j);
            const double v = oracle_loglik(obs, p);
            if (v > bv) {
                bv = v;
                best = p;
            }
        }
    return best;
}

}  // namespace

TEST(QFunction, Values) {
    EXPECT_DOUBLE_EQ(q_function(0.0), 0.5);
    for (double x : {0.5, 1.0, 2.0}) EXPECT_NEAR(q_function(x) + q_function(-x), 1.0, 1e-15);
    EXPECT_NEAR(q_function(1.6448536269514722), 0.05, 1e-6);
    EXPECT_NEAR(oracle::tail(1.6448536269514722), 0.05, 1e-6);
    for (double x : {-2.0, -0.3, 0.7, 3.1}) EXPECT_NEAR(q_function(x), oracle::tail(x), 1e-10);
}

TEST(QFunction, MonotoneDecreasing) {
    double prev = 1.0;
    for (double x = -8.0; x <= 8.0; x += 0.25) {
        const double q = q_function(x);
        EXPECT_LT(q, prev);
        EXPECT_GT(q, 0.0);
        prev = q;
    }
}

TEST(LogQ, AccurateOnBothTails) {
    EXPECT_NEAR(log_q(-4.333333333333333), std::log1p(-oracle::tail(4.333333333333333)), 1e-12);
    EXPECT_NEAR(log_q(30.0), std::log(0.5 * std::erfc(30.0 / std::sqrt(2.0))), 1e-9);
    EXPECT_EQ(log_q(60.0), kLogFloor);
}

TEST(LinkLikelihood, OnTheLine) {
    const auto b = blocked({0, 0}, {4, 0});
    const double z = -0.13 / 0.03;
    EXPECT_NEAR(link_log_likelihood({2, 0}, b, kPrior), std::log(1.0 - oracle::tail(-z)), 1e-12);
    EXPECT_NEAR(link_log_likelihood({2, 0}, b, kPrior), -7.5e-6, 2e-7);

    const auto nb = clear({0, 0}, {4, 0});
    EXPECT_NEAR(link_log_likelihood({2, 0}, nb, kPrior), std::log(oracle::tail(-z)), 1e-6);
    EXPECT_NEAR(std::exp(link_log_likelihood({2, 0}, nb, kPrior)), 7.5e-6, 2e-7);
}

TEST(LinkLikelihood, AtMeanRadius) {
    EXPECT_NEAR(link_log_likelihood({2, 0.13}, blocked({0, 0}, {4, 0}), kPrior), std::log(0.5), 1e-12);
}

TEST(LinkLikelihood, Monotonicity) {
    const auto b = blocked({0, 0}, {4, 0});
    const auto nb = clear({0, 0}, {4, 0});
    double pb = -INFINITY, pn = INFINITY;
    for (double y = 1.0; y >= 0.0; y -= 0.01) {
        const double lb = link_log_likelihood({2, y}, b, kPrior);
        const double ln = link_log_likelihood({2, y}, nb, kPrior);
        EXPECT_GE(lb, pb);
        EXPECT_LE(ln, pn);
        pb = lb;
        pn = ln;
    }
}

TEST(TotalLikelihood, SumsFactors) {
    ObservationSet empty;
    EXPECT_EQ(total_log_likelihood({1, 1}, empty, kPrior), 0.0);

    ObservationSet one;
    one.blocked.push_back(blocked({1, 0}, {1, 5}));
    EXPECT_EQ(total_log_likelihood({1.05, 2}, one, kPrior), link_log_likelihood({1.05, 2}, one.blocked[0], kPrior));

    ObservationSet two = one;
    two.nonblocked.push_back(clear({0, 2}, {5, 2}));
    const Point2 p{1.1, 2.2};
    const double direct = q_function((0.1 - 0.13) / 0.03) * (1.0 - q_function((0.2 - 0.13) / 0.03));
    EXPECT_NEAR(std::exp(total_log_likelihood(p, two, kPrior)), direct, 1e-12);
}

TEST(TotalLikelihood, MatchesLinearDomainProduct) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int k = 0; k < 200; ++k) {
        ObservationSet obs;
        const int n = 1 + static_cast<int>(gen() % 6);
        for (int i = 0; i < n; ++i) {
            const Point2 a{u(gen), u(gen)}, b{u(gen), u(gen)};
            (i % 2 ? obs.nonblocked : obs.blocked).push_back(link_through(a, b, i % 2 ? LinkKind::NonBlocked : LinkKind::Blocked));
        }
        const Point2 th{u(gen), u(gen)};
        double prod = 1.0;
        for (const auto& l : obs.blocked) prod *= q_function((std::abs(l.signed_distance(th)) - 0.13) / 0.03);
        for (const auto& l : obs.nonblocked) prod *= 1.0 - q_function((std::abs(l.signed_distance(th)) - 0.13) / 0.03);
        if (prod < 1e-300) continue;
        EXPECT_NEAR(total_log_likelihood(th, obs, kPrior), std::log(prod), 1e-9 * std::max(1.0, std::abs(std::log(prod))));
    }
}

TEST(GridSearch, PerpendicularBlockedLines) {
    ObservationSet obs;
    obs.blocked = {blocked({1, 0}, {1, 5}), blocked({0, 2}, {5, 2})};
    const auto est = ml_grid_search(obs, kPrior, GridSpec{0.01, 0, 3, 0, 3});
    EXPECT_NEAR(est.theta.x, 1.0, 0.01);
    EXPECT_NEAR(est.theta.y, 2.0, 0.01);
}

TEST(GridSearch, SingleLineTieGoesToSmallestX) {
    ObservationSet obs;
    obs.blocked = {blocked({0, 2}, {5, 2})};
    const auto est = ml_grid_search(obs, kPrior, GridSpec{0.05, 0, 3, 0, 3});
    EXPECT_NEAR(est.theta.y, 2.0, 0.05 + 1e-12);
    EXPECT_EQ(est.theta.x, 0.0);
}

TEST(GridSearch, NonBlockedLinePushesAway) {
    ObservationSet obs;
    obs.blocked = {blocked({1, 0}, {1, 5})};
    obs.nonblocked = {clear({0, 0}, {5, 0})};
    const GridSpec g{0.01, 0, 2, 0, 1};
    const auto est = ml_grid_search(obs, kPrior, g);
    EXPECT_GE(est.theta.y, 0.13 - 0.01);
    const Point2 ref = brute_argmax(obs, g);
    EXPECT_NEAR(est.theta.x, 1.0, 0.01);
    // The likelihood saturates far from the NB line, so compare values, not points.
    EXPECT_GE(ref.y, 0.13 - 0.01);
    EXPECT_NEAR(oracle_loglik(obs, est.theta), oracle_loglik(obs, ref), 1e-9);
}

TEST(GridSearch, OutageWithoutBlockedLinks) {
    ObservationSet obs;
    obs.nonblocked = {clear({0, 0}, {5, 0})};
    EXPECT_THROW(ml_grid_search(obs, kPrior, GridSpec{}), Outage);
}

TEST(GridSearch, WorkerCountDoesNotChangeResult) {
    ObservationSet obs;
    obs.blocked = {blocked({0.2, 0.1}, {4.3, 3.9}), blocked({0.1, 4.0}, {3.5, 0.5})};
    obs.nonblocked = {clear({0, 2.2}, {5, 2.4}), clear({1.5, 0}, {2.5, 5})};
    const GridSpec g{0.05, 0, 5, 0, 5};
    const auto one = ml_grid_search(obs, kPrior, g, DistanceMode::Line, 1);
    for (unsigned w : {2u, 3u, 7u, 64u}) {
        const auto many = ml_grid_search(obs, kPrior, g, DistanceMode::Line, w);
        EXPECT_EQ(one.theta, many.theta);
        EXPECT_EQ(one.loglik, many.loglik);
    }
}

TEST(GridSearch, PermutationInvariant) {
    ObservationSet obs;
    obs.blocked = {blocked({0.2, 0.1}, {4.3, 3.9}), blocked({0.1, 4.0}, {3.5, 0.5}), blocked({2, 0}, {2.1, 5})};
    obs.nonblocked = {clear({0, 2.2}, {5, 2.4})};
    const GridSpec g{0.05, 0, 5, 0, 5};
    const auto a = ml_grid_search(obs, kPrior, g);
    std::reverse(obs.blocked.begin(), obs.blocked.end());
    const auto b = ml_grid_search(obs, kPrior, g);
    EXPECT_EQ(a.theta, b.theta);
}

TEST(GridSearch, SegmentModeIgnoresLinksEndingEarly) {
    // Blocked link ends at x=1; in segment mode points past it are penalised.
    ObservationSet obs;
    obs.blocked = {blocked({0, 1}, {1, 1}), blocked({0.5, 0}, {0.5, 2})};
    const auto est = ml_grid_search(obs, kPrior, GridSpec{0.05, 0, 2, 0, 2}, DistanceMode::Segment);
    EXPECT_LE(est.theta.x, 1.0 + 0.13);
}
