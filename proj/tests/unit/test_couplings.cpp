#include <cmath>
#include <memory>
#include <numbers>

#include <gtest/gtest.h>

#include "sdelab/couplings.hpp"
#include "sdelab/errors.hpp"
#include "sdelab/parallel.hpp"

using namespace sdelab;

namespace {

SdeModel brownian() {
    return make_model(PiecewisePolynomial::constant(0), PiecewisePolynomial::constant(1), 0, 1);
}
SdeModel ou() {
    return make_model(PiecewisePolynomial::polynomial({0, -1}), PiecewisePolynomial::constant(1), 0, 1);
}
SdeModel indicator() {
    return make_model(PiecewisePolynomial::step(0, 0, 1), PiecewisePolynomial::constant(1), 0, 1);
}
std::shared_ptr<const TransformG> g_for(const SdeModel& m) {
    return std::make_shared<const TransformG>(build_jump_removal_transform(m));
}

CouplingExperimentConfig config(const SdeModel& m, std::size_t n, std::size_t reps, std::size_t fine = 64,
                                std::uint64_t seed = 1) {
    auto cfg = CouplingExperimentConfig::uniform(m, n, g_for(m));
    cfg.m = fine;
    cfg.replications = reps;
    cfg.seed = seed;
    return cfg;
}

// 2 (int_a^b f^2 - (int_a^b f)^2 / (b - a)) with f(s) = exp(-(b - s)), by Simpson's rule.
double bridge_variance_oracle(double a, double b) {
    const int n = 2000;
    const double h = (b - a) / n;
    double s1 = 0, s2 = 0;
    for (int k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 1 : (k % 2 ? 4 : 2);
        const double f = std::exp(-(b - (a + k * h)));
        s1 += w * f;
        s2 += w * f * f;
    }
    s1 *= h / 3;
    s2 *= h / 3;
    return 2 * (s2 - s1 * s1 / (b - a));
}

}  // namespace

TEST(Config, Validation) {
    auto cfg = config(ou(), 4, 100);
    EXPECT_NO_THROW(cfg.validate());
    cfg.coarse_times = {0.0, 0.05, 0.1, 1.0};  // gap 0.9 > 2T/n = 2/3
    EXPECT_THROW(cfg.validate(), ValidationError);
    auto bad = CouplingExperimentConfig::uniform(indicator(), 4);
    EXPECT_THROW(bad.validate(), ValidationError);  // jump without a transform
    auto short_grid = config(ou(), 4, 100);
    short_grid.coarse_times.back() = 0.9;
    EXPECT_THROW(short_grid.validate(), ValidationError);
    auto one = config(ou(), 4, 1);
    EXPECT_THROW(one.validate(), ValidationError);
}

TEST(GlobalDistance, AdditiveModelIsPinned) {
    const auto d = global_coupling_distance(config(brownian(), 4, 200));
    EXPECT_EQ(d.estimate, 0.0);
    const auto l = local_coupling_distances(config(brownian(), 4, 200));
    for (double v : l.per_interval) EXPECT_EQ(v, 0.0);
}

TEST(GlobalDistance, OuSingleIntervalClosedForm) {
    const auto d = global_coupling_distance(config(ou(), 1, 10000, 256));
    const double exact = bridge_variance_oracle(0, 1);
    EXPECT_NEAR(exact, 2 * (0.43233 - 0.39958), 1e-4);
    EXPECT_NEAR(d.mean_power, exact, 3 * d.mean_power_se);
    EXPECT_NEAR(d.estimate, std::sqrt(d.mean_power), 1e-15);
}

TEST(LocalDistance, OuPerIntervalClosedForm) {
    const auto l = local_coupling_distances(config(ou(), 2, 10000, 128));
    ASSERT_EQ(l.per_interval.size(), 2u);
    const double exact = bridge_variance_oracle(0, 0.5);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(l.per_interval[i], exact, 3 * l.per_interval_se[i]);
    EXPECT_NEAR(l.estimate, l.per_interval[0] + l.per_interval[1], 1e-15);
}

TEST(LocalDistance, IndicatorNonNegative) {
    const auto l = local_coupling_distances(config(indicator(), 8, 500));
    for (double v : l.per_interval) EXPECT_GE(v, 0.0);
    EXPECT_TRUE(std::isfinite(l.estimate));
}

TEST(Symmetry, SwappingRolesKeepsTheLaw) {
    auto cfg = config(indicator(), 8, 10000, 32);
    const auto a = global_coupling_distance(cfg);
    cfg.swap_roles = true;
    cfg.seed = 99;
    const auto b = global_coupling_distance(cfg);
    EXPECT_NEAR(a.mean_power, b.mean_power, 3 * std::hypot(a.mean_power_se, b.mean_power_se));
}

TEST(Recursion, AdditiveModelIsZero) {
    const auto r = check_recursion_bounds(config(brownian(), 4, 100), 50);
    for (double v : r.global) EXPECT_EQ(v, 0.0);
    for (double v : r.local) EXPECT_EQ(v, 0.0);
    for (double v : r.cross) EXPECT_EQ(v, 0.0);
}

TEST(Recursion, OuRatioBandAndIdentity) {
    const auto r4 = check_recursion_bounds(config(ou(), 4, 10000), 200);
    const auto r8 = check_recursion_bounds(config(ou(), 8, 10000), 200);
    EXPECT_TRUE(r4.identity_holds);
    EXPECT_TRUE(r8.identity_holds);
    EXPECT_GE(r4.ratio, 0.25);
    EXPECT_LE(r4.ratio, 4.0);
    EXPECT_LT(std::max(r4.ratio, r8.ratio), 2.0 * std::min(r4.ratio, r8.ratio));
    EXPECT_LE(r4.ratio_ci_low, r4.ratio);
    EXPECT_GE(r4.ratio_ci_high, r4.ratio);
    // Residuals are reported per interval.
    for (std::size_t i = 0; i < r4.residual.size(); ++i) {
        EXPECT_LE(std::abs(r4.residual[i]), 5 * r4.residual_se[i] + 1e-12);
    }
}

TEST(Occupation, UnreachableJumpIsInconclusive) {
    const auto m = make_model(PiecewisePolynomial::step(0, 0, 1), PiecewisePolynomial::constant(1), 10.0, 0.01);
    const auto r = occupation_lower_bound_check(config(m, 4, 500), 0.0, 50);
    EXPECT_TRUE(r.inconclusive);
    for (double q : r.weight) EXPECT_EQ(q, 0.0);
}

TEST(Occupation, IndicatorConstantIsPositive) {
    const auto r16 = occupation_lower_bound_check(config(indicator(), 16, 4000, 32), 0.0, 300);
    ASSERT_FALSE(r16.inconclusive);
    EXPECT_TRUE(r16.positive_at_95);
    EXPECT_GT(r16.c_hat, 0.0);
}

TEST(L1Gap, BrownianClosedForm) {
    const auto g = global_l1_coupling_gap(config(brownian(), 4, 20000, 256));
    // 2 n Delta^{3/2} sqrt(2 pi) / 8 with n = 4, Delta = 1/4.
    const double exact = 2 * 4 * std::pow(0.25, 1.5) * std::sqrt(2 * std::numbers::pi) / 8;
    EXPECT_NEAR(g.gap.estimate, exact, 3 * g.gap.std_error);
    EXPECT_EQ(g.min_abs_diffusion, 1.0);
}

TEST(L1Gap, VanishingDiffusionGivesZero) {
    const auto m = make_model(PiecewisePolynomial::polynomial({0, -1}), PiecewisePolynomial::constant(0), 1, 1);
    EXPECT_EQ(global_l1_coupling_gap(config(m, 4, 100)).gap.estimate, 0.0);
}

TEST(Oracle, MeasurableEndpointHasZeroError) {
    const auto r = conditional_expectation_oracle(config(brownian(), 2, 100, 16), 8);
    EXPECT_EQ(r.error2, 0.0);
}

TEST(Oracle, OuConditionalVariance) {
    const auto r = conditional_expectation_oracle(config(ou(), 1, 10000, 256), 64);
    const double half = 0.5 * bridge_variance_oracle(0, 1);
    EXPECT_NEAR(r.error2, half, 3 * r.error2_se);
    EXPECT_NEAR(r.identity_ratio, 1.0, 0.1);
}

TEST(Failures, DivergenceNamesTheReplication) {
    const auto m = make_model(PiecewisePolynomial::polynomial({0, 0, 0, 50}), PiecewisePolynomial::constant(1), 10, 1);
    try {
        global_coupling_distance(config(m, 4, 10, 16, 7));
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("replication 0"), std::string::npos) << what;
        EXPECT_NE(what.find("seed 7"), std::string::npos) << what;
    }
}

TEST(Determinism, IndependentOfWorkerCount) {
    const auto cfg = config(indicator(), 8, 300, 16);
    set_worker_count(1);
    const auto a = global_coupling_distance(cfg);
    set_worker_count(4);
    const auto b = global_coupling_distance(cfg);
    set_worker_count(0);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.std_error, b.std_error);
}
