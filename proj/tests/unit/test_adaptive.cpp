#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "sdelab/adaptive.hpp"
#include "sdelab/errors.hpp"

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

MethodParameters params(const SdeModel& m, std::size_t n) {
    return {m, std::make_shared<const TransformG>(build_jump_removal_transform(m)), n, 16, 8, 1};
}

class StopAfter final : public AdaptiveMethod {
public:
    explicit StopAfter(std::size_t k) : k_(k) {}
    std::string name() const override { return "stop-after"; }
    double next_time(const ObservedData& d) const override { return d.horizon * (d.size() + 1) / (k_ + 1); }
    bool should_stop(const ObservedData& d) const override { return d.size() >= k_; }
    OutputPath output(const ObservedData&) const override { return {{0.0}, {0.0}}; }

private:
    std::size_t k_;
};

/// Stops after one or two queries depending on the sign of the first observation.
class CoinStop final : public AdaptiveMethod {
public:
    std::string name() const override { return "coin-stop"; }
    double next_time(const ObservedData& d) const override { return d.size() == 0 ? 1.0 : 0.5; }
    bool should_stop(const ObservedData& d) const override { return d.values[0] > 0 || d.size() >= 2; }
    OutputPath output(const ObservedData&) const override { return {{0.0}, {0.0}}; }
};

/// Keeps querying new times forever.
class NeverStop final : public AdaptiveMethod {
public:
    std::string name() const override { return "never-stop"; }
    double next_time(const ObservedData& d) const override { return 1.0 / (d.size() + 2.0); }
    bool should_stop(const ObservedData&) const override { return false; }
    OutputPath output(const ObservedData&) const override { return {{0.0}, {0.0}}; }
};

/// Queries every fine node and returns the observed path: exact for Brownian motion.
class WhiteBox final : public AdaptiveMethod {
public:
    explicit WhiteBox(std::vector<double> times) : times_(std::move(times)) {}
    std::string name() const override { return "white-box"; }
    double next_time(const ObservedData& d) const override { return times_[d.size() + 1]; }
    bool should_stop(const ObservedData& d) const override { return d.size() + 1 >= times_.size(); }
    OutputPath output(const ObservedData& d) const override {
        OutputPath out{{0.0}, {d.x0}};
        for (std::size_t k = 0; k < d.size(); ++k) {
            out.knots.push_back(d.times[k]);
            out.values.push_back(d.x0 + d.values[k]);
        }
        return out;
    }

private:
    std::vector<double> times_;
};

/// Impure: remembers how often it was asked.
class Counter final : public AdaptiveMethod {
public:
    std::string name() const override { return "counter"; }
    double next_time(const ObservedData&) const override { return 1.0 / (++calls_ + 1.0); }
    bool should_stop(const ObservedData& d) const override { return d.size() >= 4; }
    OutputPath output(const ObservedData&) const override { return {{0.0}, {0.0}}; }

private:
    mutable int calls_ = 0;
};

LatticeAccess access_for(std::uint64_t r) {
    const StreamFamily f{3, r};
    RngStream d = f.stream(Purpose::Driver);
    return LatticeAccess(sample_brownian_lattice(d, {0.0, 1.0}), f.stream(Purpose::Refinement));
}

}  // namespace

TEST(RunAdaptive, UniformCostIsN) {
    const auto m = make_uniform_method(params(indicator(), 12), Scheme::Euler);
    auto access = access_for(0);
    const auto run = run_adaptive(*m, 0.0, access);
    EXPECT_EQ(run.cost, 12u);
    for (std::size_t k = 0; k < 12; ++k) EXPECT_DOUBLE_EQ(run.data.times[k], (k + 1) / 12.0);
}

TEST(RunAdaptive, ImmediateStopCostsOne) {
    auto access = access_for(1);
    EXPECT_EQ(run_adaptive(StopAfter(1), 0.0, access).cost, 1u);
}

TEST(RunAdaptive, BisectionQueriesDistinctTimes) {
    const auto m = make_largest_increment_bisection(params(indicator(), 16));
    for (std::uint64_t r = 0; r < 20; ++r) {
        auto access = access_for(r);
        const auto run = run_adaptive(*m, 0.0, access);
        EXPECT_EQ(run.cost, 16u);
        const std::set<double> distinct(run.data.times.begin(), run.data.times.end());
        EXPECT_EQ(distinct.size(), 16u);
        EXPECT_EQ(run.data.times[0], 1.0);
    }
}

TEST(RunAdaptive, CapTurnsIntoNonTermination) {
    auto access = access_for(2);
    EXPECT_THROW(run_adaptive(NeverStop(), 0.0, access, 100), NonTerminationError);
}

TEST(LatticeAccess, QueryConsistencyAndRange) {
    auto access = access_for(4);
    std::vector<double> t{0.3, 0.7, 0.1, 0.55, 0.3 + 1e-15};
    std::vector<double> first;
    for (double s : t) first.push_back(access.query(s));
    EXPECT_EQ(first[0], first[4]);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(access.query(t[k]), first[k]);
    EXPECT_EQ(access.query(0.0), 0.0);
    EXPECT_THROW(access.query(1.5), RangeError);
    EXPECT_THROW(access.query(-0.1), RangeError);
}

TEST(MeanCost, UniformIsExact) {
    const auto m = make_uniform_method(params(indicator(), 16), Scheme::Euler);
    const auto c = mean_cost(*m, indicator(), 200, 1);
    EXPECT_EQ(c.mean, 16.0);
    EXPECT_EQ(c.std_error, 0.0);
    EXPECT_TRUE(c.within_budget(16));
}

TEST(MeanCost, RandomStop) {
    const auto c = mean_cost(CoinStop(), brownian(), 20000, 5);
    EXPECT_NEAR(c.mean, 1.5, 3 * c.std_error);
    EXPECT_LE(c.max, 2u);
}

TEST(MeanCost, CappedPolicyStaysBelowCap) {
    const auto m = make_largest_increment_bisection(params(indicator(), 10));
    const auto c = mean_cost(*m, indicator(), 200, 1);
    EXPECT_LE(c.mean, 10.0);
    EXPECT_EQ(c.max, 10u);
}

TEST(GlobalL1, WhiteBoxIsExact) {
    auto cfg = CouplingExperimentConfig::uniform(brownian(), 4);
    cfg.m = 8;
    cfg.replications = 50;
    const auto e = global_l1_error(WhiteBox(refine_uniformly(cfg.coarse_times, cfg.m)), cfg);
    EXPECT_LE(e.estimate, 1e-14);
}

TEST(GlobalL1, ZeroPathClosedForm) {
    auto cfg = CouplingExperimentConfig::uniform(brownian(), 1);
    cfg.m = 1024;
    cfg.replications = 10000;
    const auto e = global_l1_error(StopAfter(1), cfg);
    // int_0^1 sqrt(2 s / pi) ds
    const double exact = 2.0 / 3.0 * std::sqrt(2.0 / std::numbers::pi);
    EXPECT_NEAR(exact, 0.5319, 1e-4);
    EXPECT_NEAR(e.estimate, exact, 3 * e.std_error);
}

TEST(GlobalL1, NonadaptiveEmbedding) {
    for (const auto& m : {ou(), indicator()}) {
        for (std::size_t n : {4, 16}) {
            auto cfg = CouplingExperimentConfig::uniform(m, n, params(m, n).transform);
            cfg.m = 8;
            cfg.replications = 200;
            const auto method = make_uniform_method(params(m, n), Scheme::Euler);
            const auto a = global_l1_error(*method, cfg);
            const auto b = fixed_grid_euler_l1_error(cfg, n);
            EXPECT_LE(std::abs(a.estimate - b.estimate), 1e-12);
        }
    }
}

TEST(GlobalL1, EulerRateOnOu) {
    std::vector<double> ln, le;
    for (std::size_t n : {8, 16, 32, 64, 128}) {
        auto cfg = CouplingExperimentConfig::uniform(ou(), n);
        cfg.m = 16;
        cfg.replications = 1000;
        cfg.seed = n;
        const auto e = global_l1_error(*make_uniform_method(params(ou(), n), Scheme::Euler), cfg);
        ln.push_back(std::log(n));
        le.push_back(std::log(e.estimate));
    }
    const double mx = (ln.front() + ln.back()) / 2;
    double sxy = 0, sxx = 0, my = 0;
    for (double y : le) my += y / le.size();
    for (std::size_t i = 0; i < ln.size(); ++i) {
        sxy += (ln[i] - mx) * (le[i] - my);
        sxx += (ln[i] - mx) * (ln[i] - mx);
    }
    EXPECT_GE(sxy / sxx, -0.6);
    EXPECT_LE(sxy / sxx, -0.4);
}

TEST(FinalTime, MethodsRespectHalfCouplingDistance) {
    const auto m = indicator();
    const std::size_t n = 8;
    auto cfg = CouplingExperimentConfig::uniform(m, n, params(m, n).transform);
    cfg.m = 16;
    cfg.replications = 1000;
    const auto dist = global_coupling_distance(cfg);
    const auto registry = MethodRegistry::builtin();
    for (const auto& name : registry.names()) {
        const auto method = registry.create(name, params(m, n));
        const auto err = final_time_rms_error(*method, cfg);
        EXPECT_GE(err.estimate, 0.5 * dist.estimate - 3 * std::hypot(err.std_error, 0.5 * dist.std_error)) << name;
    }
}

TEST(Oracle, OutputIsTheConditionalMeanOfInnerFillings) {
    const auto m = brownian();
    const auto oracle = make_conditional_expectation_oracle(params(m, 4));
    auto access = access_for(7);
    const auto run = run_adaptive(*oracle, 0.0, access);
    // For Brownian motion E[W_T | coarse values] = W_T.
    EXPECT_NEAR(run.output.at(1.0), run.data.values.back(), 1e-12);
}

TEST(Registry, BuiltinsAndPurity) {
    const auto registry = MethodRegistry::builtin();
    const std::vector<std::string> expected{"conditional-expectation-oracle", "largest-increment-bisection",
                                            "uniform-euler", "uniform-milstein", "uniform-transformed-milstein"};
    EXPECT_EQ(registry.names(), expected);
    EXPECT_THROW(registry.create("nope", params(ou(), 4)), ValidationError);

    auto copy = registry;
    EXPECT_THROW(copy.add("counter", [](const MethodParameters&) { return std::make_shared<Counter>(); },
                          params(ou(), 4)),
                 ValidationError);
    EXPECT_NO_THROW(copy.add("stop", [](const MethodParameters&) { return std::make_shared<StopAfter>(3); },
                             params(ou(), 4)));
}

TEST(OutputPath, RightContinuousSteps) {
    const OutputPath p{{0.0, 0.5}, {1.0, 2.0}};
    EXPECT_EQ(p.at(0.0), 1.0);
    EXPECT_EQ(p.at(0.49), 1.0);
    EXPECT_EQ(p.at(0.5), 2.0);
    EXPECT_EQ(p.at(1.0), 2.0);
}
