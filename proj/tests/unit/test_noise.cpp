#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "sdelab/errors.hpp"
#include "sdelab/noise.hpp"

using namespace sdelab;

namespace {

struct Moments {
    double mean = 0, var = 0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(v.size() - 1);
    return m;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ma = moments(a), mb = moments(b);
    double c = 0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma.mean) * (b[i] - mb.mean);
    c /= static_cast<double>(a.size() - 1);
    return c / std::sqrt(ma.var * mb.var);
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

PathLattice lattice(std::vector<double> t, std::vector<double> v) { return PathLattice{std::move(t), std::move(v)}; }

}  // namespace

TEST(Lattice, SinglePoint) {
    RngStream s(1, 0, 0, Purpose::Driver);
    const auto w = sample_brownian_lattice(s, {0.0});
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w.values[0], 0.0);
}

TEST(Lattice, UnitVariance) {
    std::vector<double> v(100000);
    for (std::size_t r = 0; r < v.size(); ++r) {
        RngStream s(3, r, 0, Purpose::Driver);
        v[r] = sample_brownian_lattice(s, {0.0, 1.0}).values[1];
    }
    EXPECT_NEAR(moments(v).var, 1.0, 0.02);
}

TEST(Lattice, Replayable) {
    const auto t = uniform_times(1.0, 50);
    RngStream a(5, 2, 0, Purpose::Driver), b(5, 2, 0, Purpose::Driver);
    EXPECT_EQ(sample_brownian_lattice(a, t).values, sample_brownian_lattice(b, t).values);
    RngStream c(5, 3, 0, Purpose::Driver);
    RngStream d(5, 2, 0, Purpose::Driver);
    EXPECT_NE(sample_brownian_lattice(c, t).values, sample_brownian_lattice(d, t).values);
}

TEST(Lattice, RejectsBadTimes) {
    RngStream s(1, 0, 0, Purpose::Driver);
    EXPECT_THROW(sample_brownian_lattice(s, {0.0, 0.5, 0.5}), ValidationError);
    EXPECT_THROW(sample_brownian_lattice(s, {0.1, 0.5}), ValidationError);
}

TEST(Grids, UniformAndRefined) {
    const auto t = uniform_times(2.0, 4);
    EXPECT_EQ(t, (std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0}));
    const auto f = refine_uniformly(t, 3);
    ASSERT_EQ(f.size(), 13u);
    for (std::size_t k : coarse_positions(4, 3)) EXPECT_EQ(f[k], t[k / 3]);
    EXPECT_EQ(f.back(), 2.0);
}

TEST(Refine, BridgeMeanAndVariance) {
    const auto base = lattice({0.0, 1.0}, {0.0, 2.0});
    std::vector<double> v(100000);
    for (std::size_t r = 0; r < v.size(); ++r) {
        RngStream s(9, r, 0, Purpose::Refinement);
        const auto out = refine_lattice(s, base, {0.5});
        ASSERT_EQ(out.values[0], 0.0);
        ASSERT_EQ(out.values[2], 2.0);
        v[r] = out.values[1];
    }
    const auto m = moments(v);
    EXPECT_NEAR(m.mean, 1.0, 0.01);
    EXPECT_NEAR(m.var, 0.25, 0.01);
}

TEST(Refine, PinnedNearAKnot) {
    const auto base = lattice({0.0, 1.0}, {0.0, 2.0});
    RngStream s(1, 0, 0, Purpose::Refinement);
    const auto out = refine_lattice(s, base, {1e-14});
    EXPECT_LT(std::abs(out.values[1]), 1e-5);
}

TEST(Refine, SequentialInsertionKeepsBridgeLaw) {
    const auto base = lattice({0.0, 1.0}, {0.0, 0.0});
    std::vector<double> mid(100000), quarter(100000);
    for (std::size_t r = 0; r < mid.size(); ++r) {
        RngStream s(10, r, 0, Purpose::Refinement);
        const auto out = refine_lattice(s, base, {0.25, 0.5, 0.75});
        quarter[r] = out.values[1];
        mid[r] = out.values[2];
    }
    EXPECT_NEAR(moments(mid).var, 0.25, 0.01);
    EXPECT_NEAR(moments(quarter).var, 0.1875, 0.01);
}

TEST(Refine, Errors) {
    const auto base = lattice({0.0, 1.0}, {0.0, 0.0});
    RngStream s(1, 0, 0, Purpose::Refinement);
    EXPECT_THROW(refine_lattice(s, base, {1.5}), RangeError);
    EXPECT_THROW(refine_lattice(s, base, {0.0}), RangeError);
    EXPECT_THROW(refine_lattice(s, base, {0.6, 0.4}), ValidationError);
}

TEST(Decompose, Examples) {
    const auto a = bridge_decompose(lattice({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}), {0, 2});
    EXPECT_EQ(a.wbar[1], 0.0);
    EXPECT_EQ(a.bridge[1], 1.0);

    const auto b = bridge_decompose(lattice({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}), {0, 1, 2});
    for (double x : b.bridge) EXPECT_EQ(x, 0.0);

    const auto c = bridge_decompose(lattice({0.0, 0.25, 0.5, 1.0}, {0.0, 1.0, 1.0, 2.0}), {0, 2, 3});
    EXPECT_DOUBLE_EQ(c.wbar[1], 0.5);
    EXPECT_DOUBLE_EQ(c.bridge[1], 0.5);
}

TEST(Decompose, ExactnessAndPinning) {
    const auto t = refine_uniformly(uniform_times(1.0, 8), 16);
    const auto coarse = coarse_positions(8, 16);
    for (std::uint64_t r = 0; r < 20; ++r) {
        RngStream s(2, r, 0, Purpose::Driver);
        const auto d = bridge_decompose(sample_brownian_lattice(s, t), coarse);
        for (std::size_t j = 0; j < t.size(); ++j) {
            EXPECT_LE(std::abs(d.wbar[j] + d.bridge[j] - d.fine.values[j]), 1e-12);
        }
        for (std::size_t k : coarse) EXPECT_EQ(d.bridge[k], 0.0);
        // Wbar is affine between coarse nodes: constant second differences vanish.
        for (std::size_t j = 1; j + 1 < t.size(); ++j) {
            if (j % 16 == 0) continue;
            EXPECT_NEAR(d.wbar[j + 1] - 2 * d.wbar[j] + d.wbar[j - 1], 0.0, 1e-12);
        }
    }
}

TEST(Couple, NegationExample) {
    const auto d = bridge_decompose(lattice({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}), {0, 2});
    const auto w = couple(d, StreamFamily{1, 0}, CouplingKind::Negation);
    EXPECT_EQ(w.values[1], -1.0);
}

TEST(Couple, AgreesAtCoarseTimes) {
    const auto t = refine_uniformly(uniform_times(1.0, 4), 8);
    const auto coarse = coarse_positions(4, 8);
    for (auto kind : {CouplingKind::Negation, CouplingKind::IndependentResample}) {
        RngStream s(4, 0, 0, Purpose::Driver);
        const auto d = bridge_decompose(sample_brownian_lattice(s, t), coarse);
        const auto w = couple(d, StreamFamily{4, 0}, kind);
        for (std::size_t k : coarse) EXPECT_EQ(w.values[k], d.fine.values[k]);
        const auto wbar_tilde = bridge_decompose(w, coarse);
        for (std::size_t j = 0; j < t.size(); ++j) EXPECT_NEAR(wbar_tilde.wbar[j], d.wbar[j], 1e-12);
    }
}

TEST(Couple, ResampledBridgeIsIndependentAndLawPreserving) {
    const std::size_t reps = 100000;
    std::vector<double> b(reps), bt(reps), w(reps), wt(reps);
    const std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
    for (std::size_t r = 0; r < reps; ++r) {
        RngStream s(6, r, 0, Purpose::Driver);
        const auto d = bridge_decompose(sample_brownian_lattice(s, t), {0, 4});
        const auto c = couple(d, StreamFamily{6, r}, CouplingKind::IndependentResample);
        b[r] = d.bridge[2];
        bt[r] = c.values[2] - d.wbar[2];
        w[r] = d.fine.values[1];
        wt[r] = c.values[1];
    }
    EXPECT_NEAR(correlation(b, bt), 0.0, 0.01);
    // 1% critical value of the two-sample KS statistic: 1.628 sqrt(2 / n).
    EXPECT_LT(ks_statistic(w, wt), 1.628 * std::sqrt(2.0 / reps));
}

TEST(Bridge, MomentIdentityAndScaling) {
    const double unit = std::sqrt(2 * std::numbers::pi) / 8;  // int_0^1 sqrt(2u(1-u)/pi) du
    const std::size_t reps = 20000, m = 256;
    const std::pair<double, double> windows[] = {{0.0, 1.0}, {0.0, 0.25}, {0.5, 0.75}};
    for (const auto& [a, b] : windows) {
        std::vector<double> times(m + 1);
        for (std::size_t j = 0; j <= m; ++j) times[j] = a + (b - a) * j / static_cast<double>(m);
        std::vector<double> v(reps), path(m + 1);
        for (std::size_t r = 0; r < reps; ++r) {
            RngStream s(12, r, 0, Purpose::Bridge);
            fill_pinned_bridge(s, times, 0, m, path.data());
            double integral = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                integral += 0.5 * (times[j] - times[j - 1]) * (std::abs(path[j]) + std::abs(path[j - 1]));
            }
            v[r] = integral;
        }
        const auto mo = moments(v);
        const double se = std::sqrt(mo.var / reps);
        const double target = std::pow(b - a, 1.5) * unit;
        EXPECT_NEAR(mo.mean, target, 3 * se) << a << " " << b;
        if (b - a == 1.0) {
            EXPECT_NEAR(mo.mean, 0.31333, 0.01);
        }
    }
}

TEST(PathDump, Columns) {
    const auto d = bridge_decompose(lattice({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}), {0, 2});
    const auto w = couple(d, StreamFamily{1, 0}, CouplingKind::Negation);
    std::ostringstream out;
    write_path_dump(out, d, w);
    std::string header;
    std::istringstream in(out.str());
    std::getline(in, header);
    EXPECT_EQ(header, "time,W,Wbar,B,Btilde,Wtilde");
    std::string row;
    std::getline(in, row);
    std::getline(in, row);
    EXPECT_EQ(row, "0.5,1,0,1,-1,-1");
}

TEST(CouplingKindNames, RoundTrip) {
    for (auto k : {CouplingKind::Negation, CouplingKind::IndependentResample}) {
        EXPECT_EQ(coupling_kind_from_string(to_string(k)), k);
    }
    EXPECT_THROW(coupling_kind_from_string("mirror"), ValidationError);
}
