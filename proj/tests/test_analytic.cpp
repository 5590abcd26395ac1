#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ehpc/analytic.hpp"

using namespace ehpc;

namespace {

// Plain partial sum of the renewal series with a fixed number of terms.
double ff_partial_sum(double p, double gamma, double bbar, long terms) {
    double s = 0.0;
    for (long i = 1; i <= terms; ++i) {
        const double w = std::pow(1.0 - p, static_cast<double>(i - 1));
        s += p * w * 0.5 * std::log2(1.0 + gamma * bbar * p * w);
    }
    return s;
}

}  // namespace

TEST(UpperBound, Values) {
    EXPECT_DOUBLE_EQ(upper_bound(1.0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(upper_bound(3.0, 1.0), 1.0);
    EXPECT_NEAR(upper_bound(10.0, 1.0), 1.7297158093186487, 1e-15);
}

TEST(AdditiveGapConstant, IsOneOverTwoLnTwo) {
    EXPECT_DOUBLE_EQ(kAdditiveGap, 1.0 / (2.0 * std::log(2.0)));
    EXPECT_GT(kAdditiveGap, 0.72);
    EXPECT_LT(kAdditiveGap, 0.7214);
}

TEST(FfBernoulliExact, SingleTermAtPOne) {
    EXPECT_EQ(ff_bernoulli_exact(1.0, {7.0, 2.0}), 0.5 * std::log2(1.0 + 14.0));
}

TEST(FfBernoulliExact, MatchesLongPartialSum) {
    const double oracle = ff_partial_sum(0.5, 1.0, 2.0, 1'000'000);
    EXPECT_NEAR(ff_bernoulli_exact(0.5, {2.0, 1.0}, 1e-12), oracle, 1e-12);
}

TEST(FfBernoulliExact, TailBoundHoldsForSmallP) {
    for (double p : {1e-3, 0.01, 0.1}) {
        const double oracle = ff_partial_sum(p, 1.0, 100.0, 200'000);
        for (double tol : {1e-4, 1e-8, 1e-12}) {
            const double v = ff_bernoulli_exact(p, {100.0, 1.0}, tol);
            EXPECT_LE(v, oracle + 1e-12);
            EXPECT_GE(v, oracle - tol - 1e-12);
        }
    }
}

TEST(FfBernoulliExact, WithinUniversalGapOfUpperBound) {
    const double v = ff_bernoulli_exact(0.1, {10.0, 1.0});
    const double ub = upper_bound(1.0, 1.0);
    EXPECT_LE(v, ub);
    EXPECT_GE(v, ub - 0.7213);
}

TEST(FfAdditiveLower, BernoulliForm) {
    EXPECT_NEAR(ff_additive_lower_bernoulli(0.5, {2.0, 1.0}), 0.0, 1e-15);
    EXPECT_EQ(ff_additive_lower_bernoulli(1.0, {5.0, 1.0}), 0.5 * std::log2(6.0));
    EXPECT_THROW(ff_additive_lower_bernoulli(0.0, {5.0, 1.0}), ParameterError);
}

TEST(FfAdditiveLower, PenaltySupremumAsPVanishes) {
    EXPECT_EQ(bernoulli_penalty(1.0), 0.0);
    EXPECT_NEAR(bernoulli_penalty(1e-9), kAdditiveGap, 1e-8);
    // Increasing towards the supremum as p decreases.
    double prev = 0.0;
    for (double p : {0.9, 0.5, 0.1, 0.01, 1e-4}) {
        const double v = bernoulli_penalty(p);
        EXPECT_GT(v, prev);
        EXPECT_LT(v, kAdditiveGap);
        prev = v;
    }
}

TEST(FfAdditiveLower, GeneralForm) {
    EXPECT_DOUBLE_EQ(ff_additive_lower(3.0, 1.0), 1.0 - kAdditiveGap);
}

TEST(FfMultiplicativeLower, Values) {
    EXPECT_DOUBLE_EQ(ff_multiplicative_lower(3.0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(ff_multiplicative_lower_bernoulli(1.0, {5.0, 1.0}), upper_bound(5.0, 1.0));
    EXPECT_NEAR(ff_multiplicative_lower_bernoulli(0.5, {2.0, 1.0}), 1.0 / 3.0, 1e-15);
}

TEST(BernoulliOptimal, DeterministicArrivals) {
    const auto a = solve_bernoulli_kkt(1.0, {5.0, 2.0});
    EXPECT_DOUBLE_EQ(bernoulli_optimal_throughput(a), 0.5 * std::log2(11.0));
}

TEST(BernoulliOptimal, StrictlyBetweenFixedFractionAndUpperBound) {
    const SystemParams params{10.0, 1.0};
    const double opt = bernoulli_optimal_throughput(solve_bernoulli_kkt(0.1, params));
    EXPECT_GT(opt, ff_bernoulli_exact(0.1, params));
    EXPECT_LT(opt, upper_bound(1.0, 1.0));
}

TEST(BernoulliOptimal, DominatesFixedFractionOnRandomPairs) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> up(0.01, 1.0), lb(-1.0, 4.0);
    for (int i = 0; i < 200; ++i) {
        const double p = up(rng);
        const SystemParams params{std::pow(10.0, lb(rng)), 1.0};
        EXPECT_GE(bernoulli_optimal_throughput(solve_bernoulli_kkt(p, params)) + 1e-12, ff_bernoulli_exact(p, params));
    }
}

TEST(Greedy, BernoulliThroughput) {
    EXPECT_DOUBLE_EQ(greedy_bernoulli_throughput(1.0, {3.0, 1.0}), 1.0);
    const double g = greedy_bernoulli_throughput(0.1, {1000.0, 1.0});
    EXPECT_NEAR(g, 0.1 * 0.5 * std::log2(1001.0), 1e-15);
    EXPECT_NEAR(g, 0.49836, 1e-5);
    const double gap = upper_bound(100.0, 1.0) - g;
    EXPECT_NEAR(gap, 2.831, 1e-3);
    EXPECT_GT(gap, kAdditiveGap);
}

TEST(Sandwich, HoldsAcrossLogGrid) {
    for (int ip = 0; ip < 12; ++ip) {
        const double p = std::pow(10.0, -2.0 + 2.0 * ip / 11.0);
        for (int ib = 0; ib < 12; ++ib) {
            const double bbar = std::pow(10.0, -1.0 + 5.0 * ib / 11.0);
            for (double gamma : {0.1, 1.0, 10.0}) {
                const SystemParams params{bbar, gamma};
                const double ub = upper_bound(p * bbar, gamma);
                const double lower = ff_additive_lower_bernoulli(p, params);
                const double ff = ff_bernoulli_exact(p, params);
                const double opt = bernoulli_optimal_throughput(solve_bernoulli_kkt(p, params));
                EXPECT_LE(lower, ff + 1e-9);
                EXPECT_LE(ff, opt + 1e-9);
                EXPECT_LE(opt, ub + 1e-9);
                EXPECT_LE(ub - ff, kAdditiveGap + 1e-9);
                EXPECT_GE(ff / ub, 0.5 - 1e-9);
                EXPECT_GE(ff + 1e-9, ff_multiplicative_lower_bernoulli(p, params));
            }
        }
    }
}

TEST(BoundsReport, BernoulliFieldsPopulated) {
    const auto r = bounds_report(Bernoulli{0.1, std::nullopt}, {10.0, 1.0});
    EXPECT_DOUBLE_EQ(r.mu, 1.0);
    EXPECT_DOUBLE_EQ(r.upper, 0.5);
    ASSERT_TRUE(r.ff_bernoulli_exact && r.bernoulli_optimal && r.greedy_bernoulli);
    EXPECT_LE(r.ff_additive_lower, *r.ff_bernoulli_exact);
    EXPECT_LE(*r.ff_bernoulli_exact, *r.bernoulli_optimal);
    EXPECT_LE(*r.bernoulli_optimal, r.upper);
    EXPECT_GE(r.ff_additive_lower, r.upper - kAdditiveGap);
    EXPECT_DOUBLE_EQ(r.ff_multiplicative_lower, r.upper / 2.0);
}

TEST(BoundsReport, GeneralModelsOmitBernoulliFields) {
    for (const EnergyModel& m : {EnergyModel{Exponential{1.0}}, EnergyModel{Uniform{0.0, 4.0}},
                                 EnergyModel{Bernoulli{0.5, 1.0}}}) {
        const auto r = bounds_report(m, {4.0, 1.0});
        EXPECT_FALSE(r.ff_bernoulli_exact.has_value());
        EXPECT_FALSE(r.bernoulli_optimal.has_value());
        EXPECT_DOUBLE_EQ(r.ff_additive_lower, r.upper - kAdditiveGap);
    }
}
