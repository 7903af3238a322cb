#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "sdelab/catalog.hpp"
#include "sdelab/errors.hpp"
#include "sdelab/transforms.hpp"

using namespace sdelab;

namespace {

SdeModel indicator_model(double height = 1.0, double sigma = 1.0) {
    return make_model(PiecewisePolynomial::step(0.0, 0.0, height), PiecewisePolynomial::constant(sigma), 0, 1);
}

SdeModel affine_model() {
    return make_model(PiecewisePolynomial::step(0.0, 0.0, 1.0), PiecewisePolynomial::polynomial({2.0, 1.0}), 0, 1);
}

// Independent evaluation of one bump term and its first two derivatives.
struct BumpOracle {
    double alpha, nu;
    double phi(double u) const { return std::abs(u) >= 1 ? 0 : std::pow(1 - u * u, 4); }
    double value(double x) const { return x + alpha * x * std::abs(x) * phi(x / nu); }
};

}  // namespace

TEST(JumpRemoval, NoBreakpointsGivesIdentity) {
    const auto m = make_model(PiecewisePolynomial::polynomial({0.0, -1.0}), PiecewisePolynomial::constant(1.0), 0, 1);
    const auto g = build_jump_removal_transform(m);
    EXPECT_TRUE(g.is_identity());
    EXPECT_TRUE(g.bumps().empty());
    EXPECT_EQ(g.value(0.7), 0.7);
}

TEST(JumpRemoval, StrengthForIndicator) {
    const auto g = build_jump_removal_transform(indicator_model());
    ASSERT_EQ(g.bumps().size(), 1u);
    EXPECT_DOUBLE_EQ(g.bumps()[0].strength, -0.5);
    EXPECT_EQ(g.bumps()[0].radius, 1.0);  // capped by the regularity radius
    EXPECT_GT(g.min_slope(), 0.85);
}

TEST(JumpRemoval, StrongJumpKeepsSlopeAtOneHalf) {
    // alpha = -5: the radius cap binds and min G' = 1 - |alpha| nu K = 1/2.
    const auto g = build_jump_removal_transform(indicator_model(10.0, 1.0));
    ASSERT_EQ(g.bumps().size(), 1u);
    const BumpOracle o{-5.0, g.bumps()[0].radius};
    EXPECT_LT(o.nu, 1.0);
    double min_slope = 1.0;
    const double h = 1e-6;
    for (int j = -20000; j <= 20000; ++j) {
        const double x = o.nu * j / 20000.0;
        min_slope = std::min(min_slope, (o.value(x + h) - o.value(x - h)) / (2 * h));
    }
    EXPECT_NEAR(min_slope, 0.5, 1e-6);
    EXPECT_NEAR(g.min_slope(), 0.5, 1e-6);
}

TEST(JumpRemoval, StrengthScalesWithDiffusion) {
    const auto g = build_jump_removal_transform(indicator_model(2.0, 2.0));
    ASSERT_EQ(g.bumps().size(), 1u);
    EXPECT_DOUBLE_EQ(g.bumps()[0].strength, -0.25);
}

TEST(JumpRemoval, MatchesIndependentFormula) {
    const auto g = build_jump_removal_transform(indicator_model());
    const BumpOracle o{-0.5, 1.0};
    for (double x : {-0.5, -0.3, -0.1, 0.0, 0.02, 0.2, 0.33, 1.0}) EXPECT_NEAR(g.value(x), o.value(x), 1e-14);
    EXPECT_DOUBLE_EQ(g.slope(0.0), 1.0);
    EXPECT_DOUBLE_EQ(g.curvature(0.0, Side::Right), -1.0);
    EXPECT_DOUBLE_EQ(g.curvature(0.0, Side::Left), 1.0);
}

TEST(JumpRemoval, OverlappingBumpsAreRejected) {
    EXPECT_THROW(TransformG({{0.0, -0.5, 0.6}, {1.0, -0.5, 0.6}}), ValidationError);
}

TEST(TransformedCoefficients, IdentityLeavesModelUnchanged) {
    const auto m = indicator_model();
    const auto out = transformed_coefficients(std::make_shared<TransformG>(TransformG::identity()), m);
    EXPECT_EQ(out.drift, m.drift);
    EXPECT_EQ(out.diffusion, m.diffusion);
    EXPECT_EQ(out.x0, m.x0);
}

TEST(TransformedCoefficients, JumpIsRemoved) {
    for (const auto& m : {indicator_model(), affine_model(), indicator_model(2.0, 2.0)}) {
        const auto g = std::make_shared<TransformG>(build_jump_removal_transform(m));
        const auto tm = transformed_coefficients(g, m);
        const double y = g->value(0.0);
        EXPECT_LT(std::abs(tm.drift->value(y, Side::Right) - tm.drift->value(y, Side::Left)), 1e-10);
        EXPECT_GT(std::abs(m.drift->value(0.0, Side::Right) - m.drift->value(0.0, Side::Left)), 0.0);
    }
}

TEST(TransformedCoefficients, IndicatorValuesAtTheJump) {
    const auto m = indicator_model();
    const auto g = std::make_shared<TransformG>(build_jump_removal_transform(m));
    const auto tm = transformed_coefficients(g, m);
    // G'(0) mu(0+) + G''(0+)/2 = 1 - 1/2 and G'(0) mu(0-) + G''(0-)/2 = 0 + 1/2.
    EXPECT_NEAR(tm.drift->value(0.0, Side::Right), 0.5, 1e-12);
    EXPECT_NEAR(tm.drift->value(0.0, Side::Left), 0.5, 1e-12);
    EXPECT_NEAR(tm.diffusion->value(0.0), 1.0, 1e-15);
}

TEST(Lamperti, ConstantDiffusionTwo) {
    const auto m = make_model(PiecewisePolynomial::constant(0.0), PiecewisePolynomial::constant(2.0), 0, 1);
    const auto h = lamperti_transform(m, 0.0, 0.5);
    for (double x : {-3.0, -0.2, 0.0, 0.4, 7.0}) EXPECT_NEAR(h.value(x), x / 2.0, 1e-14);
    EXPECT_NEAR(invert_transform(h, 1.0), 2.0, 1e-12);
}

TEST(Lamperti, UnitDiffusionIsIdentity) {
    const auto h = lamperti_transform(indicator_model(), 0.0, 0.5);
    for (double x : {-2.0, 0.0, 0.3}) EXPECT_NEAR(h.value(x), x, 1e-14);
}

TEST(Lamperti, AffineDiffusionClosedForm) {
    const auto m = make_model(PiecewisePolynomial::constant(0.0), PiecewisePolynomial::polynomial({1.0, 1.0}), 0, 1);
    const auto h = lamperti_transform(m, 0.0, 0.5);
    EXPECT_NEAR(h.value(0.5), std::log(1.5), 1e-12);
    EXPECT_NEAR(h.value(-0.5), std::log(0.5), 1e-12);
    // Linear continuation beyond the window with slope 1 / sigma(0.5).
    EXPECT_NEAR(h.value(1.5), std::log(1.5) + 1.0 / 1.5, 1e-12);
    EXPECT_EQ(h.value(0.0), 0.0);
}

TEST(Lamperti, NormalizationOnGrid) {
    const auto m = affine_model();
    const auto h = lamperti_transform(m, 0.0, 0.5);
    const double a = h.value(-0.5), b = h.value(0.5);
    for (int k = 0; k <= 1000; ++k) {
        const double x = h.inverse(a + (b - a) * k / 1000.0);
        EXPECT_NEAR(h.slope(x) * h.continuation(x), 1.0, 1e-8);
    }
}

TEST(Lamperti, NegativeDiffusionIsDecreasing) {
    const auto m = make_model(PiecewisePolynomial::constant(0.0), PiecewisePolynomial::polynomial({-2.0, 0.5}), 0, 1);
    const auto h = lamperti_transform(m, 0.0, 0.5);
    EXPECT_FALSE(h.increasing());
    EXPECT_NEAR(h.inverse(h.value(0.3)), 0.3, 1e-10);
}

TEST(Lamperti, VanishingDiffusionIsDegenerate) {
    const auto m = make_model(PiecewisePolynomial::constant(0.0), PiecewisePolynomial::polynomial({0.0, 1.0}), 0, 1);
    EXPECT_THROW(lamperti_transform(m, 0.0, 0.5), DegeneracyError);
}

TEST(Inverse, Examples) {
    EXPECT_EQ(invert_transform(TransformG::identity(), 3.7), 3.7);
    const TransformG g({{0.0, -0.5, 1.0}});
    EXPECT_NEAR(invert_transform(g, g.value(0.3)), 0.3, 1e-10);
}

TEST(Inverse, RandomRoundTrip) {
    const auto g = build_jump_removal_transform(affine_model());
    const auto h = lamperti_transform(affine_model(), 0.0, 0.5);
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int k = 0; k < 1000; ++k) {
        const double x = u(gen);
        EXPECT_NEAR(g.inverse(g.value(x)), x, 1e-9);
        EXPECT_NEAR(h.inverse(h.value(x)), x, 1e-9);
        EXPECT_NEAR(g.inverse_near(g.value(x), x + 0.1), x, 1e-9);
    }
}

TEST(Inverse, ResidualWithinRelativeTolerance) {
    const auto g = build_jump_removal_transform(indicator_model());
    for (double y : {-1e6, -0.2, 0.0, 0.05, 0.3, 1e6}) {
        const double x = g.inverse(y);
        EXPECT_LE(std::abs(g.value(x) - y), kInverseTolerance * std::max(1.0, std::abs(y)));
    }
}

TEST(Inverse, UnreachableValueIsRangeError) {
    EXPECT_THROW(invert_transform(TransformG::identity(), std::numeric_limits<double>::infinity()), RangeError);
}

TEST(Lipschitz, Examples) {
    EXPECT_NEAR(lipschitz_certificate([](double x) { return 3 * x; }, 0, 1, 17), 3.0, 1e-12);
    const auto step = [](double x) { return x >= 0 ? 1.0 : 0.0; };
    EXPECT_GE(lipschitz_certificate(step, -1, 1, 1001), 500.0);
    EXPECT_THROW(lipschitz_certificate([](double x) { return 1.0 / x; }, 0, 1, 11), CertificationError);
}

TEST(Lipschitz, TransformedDriftIsGridStable) {
    const auto m = indicator_model();
    const auto g = std::make_shared<TransformG>(build_jump_removal_transform(m));
    const auto tm = transformed_coefficients(g, m);
    const auto f = [&](double y) { return tm.drift->value(y); };
    const double a = lipschitz_certificate(f, -1, 1, 10000);
    const double b = lipschitz_certificate(f, -1, 1, 20000);
    EXPECT_TRUE(std::isfinite(a) && std::isfinite(b));
    EXPECT_LT(std::max(a, b), 2.0 * std::min(a, b));
    const auto gv = [&](double x) { return g->value(x); };
    EXPECT_TRUE(std::isfinite(lipschitz_certificate(gv, -3, 3, 10000)));
}

TEST(Composition, ChainRuleDerivatives) {
    const auto m = affine_model();
    const auto g = std::make_shared<TransformG>(build_jump_removal_transform(m));
    const auto h = std::make_shared<TransformH>(lamperti_transform(m, 0.0, 0.5));
    const ComposedTransform gz(g, h);
    for (double x : {-0.4, -0.13, 0.07, 0.29}) {
        const double z = h->value(x);
        EXPECT_NEAR(gz.value(z), g->value(x), 1e-12);
        EXPECT_NEAR(gz.slope(z), g->slope(x) / h->slope(x), 1e-10);
        const double hp = h->slope(x), hpp = h->curvature(x);
        const double expected = (g->curvature(x) * hp - g->slope(x) * hpp) / (hp * hp * hp);
        EXPECT_NEAR(gz.curvature(z), expected, 1e-8);
    }
}

TEST(Composition, TwoStageTransformMatchesDirect) {
    const auto m = affine_model();
    const auto g = std::make_shared<TransformG>(build_jump_removal_transform(m));
    const auto h = std::make_shared<TransformH>(lamperti_transform(m, 0.0, 0.5));
    const auto via_h = transformed_coefficients(h, m);
    const auto two_stage = transformed_coefficients(std::make_shared<ComposedTransform>(g, h), via_h);
    const auto direct = transformed_coefficients(g, m);
    for (int k = -40; k <= 40; ++k) {
        const double x = 0.011 * k + 0.003;
        const double y = g->value(x);
        EXPECT_NEAR(two_stage.drift->value(y), direct.drift->value(y), 1e-8) << x;
        EXPECT_NEAR(two_stage.diffusion->value(y), direct.diffusion->value(y), 1e-8) << x;
    }
    EXPECT_NEAR(two_stage.x0, direct.x0, 1e-12);
}

TEST(TransformJson, RoundTrip) {
    const auto g = build_jump_removal_transform(affine_model());
    const auto back = transform_from_json(transform_to_json(g));
    ASSERT_EQ(back.bumps().size(), g.bumps().size());
    for (double x : {-0.2, 0.0, 0.1}) EXPECT_EQ(back.value(x), g.value(x));
}
