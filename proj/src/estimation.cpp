#include "sdelab/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "sdelab/errors.hpp"
#include "sdelab/noise.hpp"
#include "sdelab/parallel.hpp"
#include "sdelab/rng.hpp"
#include "sdelab/solvers.hpp"

namespace sdelab {

SampleStats summarize(std::span<const double> samples) {
    SampleStats s;
    s.count = samples.size();
    if (s.count == 0) return s;
    // Two passes on data shifted by the first sample: constant samples give exactly zero spread.
    const double shift = samples[0];
    std::vector<double> d(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) d[i] = samples[i] - shift;
    const double mean_shifted = pairwise_sum(d) / static_cast<double>(s.count);
    s.mean = shift + mean_shifted;
    if (s.count < 2) return s;
    for (auto& v : d) {
        const double e = v - mean_shifted;
        v = e * e;
    }
    s.variance = pairwise_sum(d) / static_cast<double>(s.count - 1);
    s.std_error = std::sqrt(s.variance / static_cast<double>(s.count));
    return s;
}

double normal_two_sided_quantile(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

MeanCI mc_mean_ci(std::span<const double> samples, double level) {
    if (samples.size() < 2) throw InsufficientDataError("need at least two samples");
    const double z = normal_two_sided_quantile(level);
    const auto s = summarize(samples);
    return {s.mean, z * s.std_error};
}

RateEstimate fit_rate(std::vector<RatePoint> points, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
    std::sort(points.begin(), points.end(),
              [](const RatePoint& a, const RatePoint& b) { return a.n < b.n; });
    RateEstimate r;
    std::vector<double> xs, ys;
    for (const auto& p : points) {
        if (!(p.n > 0.0) || !(p.error > 0.0) || !(p.se >= 0.0)) {
            throw ValidationError("rate points need n > 0, error > 0 and se >= 0");
        }
        if (p.error < 3.0 * p.se) {
            r.excluded_n.push_back(p.n);
            continue;
        }
        if (!ys.empty() && !(p.error < std::exp(ys.back()))) r.monotone = false;
        xs.push_back(std::log(p.n));
        ys.push_back(std::log(p.error));
    }
    r.count = xs.size();
    if (r.count < 3) throw InsufficientDataError("fewer than three usable rate points");
    const double k = static_cast<double>(r.count);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < r.count; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < r.count; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw InsufficientDataError("rate points need distinct n");
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < r.count; ++i) {
        const double e = ys[i] - r.intercept - r.slope * xs[i];
        sse += e * e;
    }
    r.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    const double t = boost::math::quantile(boost::math::students_t_distribution<double>(k - 2.0),
                                           0.5 + 0.5 * level);
    r.slope_ci_half_width = t * std::sqrt(sse / (k - 2.0) / sxx);
    return r;
}

double kernel_density(std::span<const double> samples, double x, double h) {
    if (samples.empty() || !(h > 0.0)) throw ValidationError("density needs samples and h > 0");
    std::vector<double> terms(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = (x - samples[i]) / h;
        terms[i] = std::exp(-0.5 * u * u);
    }
    return pairwise_sum(terms) /
           (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
}

double default_bandwidth(std::span<const double> samples) {
    const auto s = summarize(samples);
    return std::pow(static_cast<double>(s.count), -0.2) * std::sqrt(s.variance);
}

bool DensityEstimate::positive_at(double confidence) const {
    if (point_mass) return false;
    const double z =
        boost::math::quantile(boost::math::normal_distribution<double>(), confidence);
    return estimate - z * std_error > 0.0;
}

DensityEstimate density_with_bootstrap(std::span<const double> samples, double x,
                                       std::size_t resamples, std::uint64_t seed) {
    if (samples.size() < 2) throw InsufficientDataError("need at least two samples");
    DensityEstimate d;
    d.samples = samples.size();
    d.resamples = resamples;
    const auto stats = summarize(samples);
    if (!(stats.variance > 0.0)) {
        d.point_mass = true;
        d.location = samples.front();
        return d;
    }
    d.bandwidth = default_bandwidth(samples);
    d.estimate = kernel_density(samples, x, d.bandwidth);
    if (resamples < 2) return d;

    std::vector<double> boot(resamples);
    parallel_for(resamples, [&](std::size_t b) {
        RngStream stream(seed, b, 0, Purpose::Bootstrap);
        std::vector<double> draw(samples.size());
        for (auto& v : draw) {
            v = samples[static_cast<std::size_t>(stream.uniform() * static_cast<double>(samples.size()))];
        }
        const double h = default_bandwidth(draw);
        boot[b] = h > 0.0 ? kernel_density(draw, x, h) : 0.0;
    });
    d.std_error = std::sqrt(summarize(boot).variance);
    return d;
}

DensityEstimate kernel_density_at(const SdeModel& model, double t_star, double xi,
                                  const DensityConfig& cfg) {
    model.validate();
    if (!(t_star > 0.0 && t_star <= model.horizon)) {
        throw ValidationError("t_star must lie in (0, horizon]");
    }
    if (cfg.replications < 2 || cfg.steps == 0) throw ValidationError("density needs R >= 2 and steps >= 1");
    auto transform = cfg.transform;
    if (!transform) transform = std::make_shared<const TransformG>(build_jump_removal_transform(model));
    const Stepper stepper = reference_stepper(model, transform);
    const auto times = uniform_times(t_star, cfg.steps);

    std::vector<double> finals(cfg.replications);
    for_each_replication(cfg.seed, cfg.replications, [&](std::size_t r) {
        RngStream stream = StreamFamily{cfg.seed, r}.stream(Purpose::Driver);
        const auto w = sample_brownian_lattice(stream, times);
        finals[r] = stepper.final_value(model.x0, w.times.data(), w.values.data(), w.size());
    });
    return density_with_bootstrap(finals, xi, cfg.bootstrap, cfg.seed ^ 0x5bd1e995ULL);
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InsufficientDataError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace sdelab
