#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sdelab/coefficients.hpp"
#include "sdelab/transforms.hpp"

namespace sdelab {

struct SampleStats {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double std_error = 0.0; // sqrt(variance / count)
    std::size_t count = 0;
};

/// Mean, unbiased variance and standard error; pairwise summation in index order.
SampleStats summarize(std::span<const double> samples);

struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;
};

/// Normal-approximation confidence interval. InsufficientDataError below two samples.
MeanCI mc_mean_ci(std::span<const double> samples, double level);

/// Two-sided standard normal quantile z with P(|Z| <= z) = level.
double normal_two_sided_quantile(double level);

struct RatePoint {
    double n = 0.0;
    double error = 0.0;
    double se = 0.0;
};

struct RateEstimate {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_ci_half_width = 0.0;
    std::size_t count = 0;
    std::vector<double> excluded_n;  // points dropped by the error < 3 se rule
    bool monotone = true;            // errors strictly decrease in n among used points
};

/**
 * OLS of log(error) on log(n) over the points with error >= 3 se, with a
 * t-distribution CI on the slope at the given level.
 */
RateEstimate fit_rate(std::vector<RatePoint> points, double level = 0.95);

/// Gaussian kernel estimate at x with bandwidth h.
double kernel_density(std::span<const double> samples, double x, double h);

/// Silverman-type bandwidth R^{-1/5} * sample standard deviation.
double default_bandwidth(std::span<const double> samples);

struct DensityEstimate {
    bool point_mass = false;
    double location = 0.0;  // the atom, when point_mass
    double estimate = 0.0;
    double std_error = 0.0;  // bootstrap
    double bandwidth = 0.0;
    std::size_t samples = 0;
    std::size_t resamples = 0;

    /// estimate - z_conf * std_error > 0 with a one-sided normal quantile.
    bool positive_at(double confidence) const;
};

/// Density at x from samples with a bootstrap standard error.
DensityEstimate density_with_bootstrap(std::span<const double> samples, double x,
                                       std::size_t resamples, std::uint64_t seed);

struct DensityConfig {
    std::size_t replications = 10000;
    std::size_t steps = 1024;  // uniform steps on [0, t_star]
    std::size_t bootstrap = 1000;
    std::uint64_t seed = 1;
    /// Reference transform; built from the model when null.
    std::shared_ptr<const TransformG> transform;
};

/// Simulates X_{t_star} with the reference solver and estimates its density at xi.
DensityEstimate kernel_density_at(const SdeModel& model, double t_star, double xi,
                                  const DensityConfig& cfg);

/// Empirical quantile with linear interpolation (type 7) of an unsorted sample.
double empirical_quantile(std::vector<double> values, double q);

}  // namespace sdelab
