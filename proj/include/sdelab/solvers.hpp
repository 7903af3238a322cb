#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdelab/coefficients.hpp"
#include "sdelab/noise.hpp"
#include "sdelab/transforms.hpp"

namespace sdelab {

enum class Scheme { Euler, Milstein, TransformedMilstein };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct SolutionPath {
    std::vector<double> times;
    std::vector<double> values;
    Scheme scheme = Scheme::Euler;
};

/**
 * Pathwise one-step scheme bound to a model. The transformed Milstein scheme
 * steps Y = G(X) with the coefficients of the transformed equation and maps
 * every state back through G^{-1}.
 */
class Stepper {
public:
    Stepper(SdeModel model, Scheme scheme, std::shared_ptr<const TransformG> transform = nullptr);

    /// Writes the states at t[0..count-1] into out, starting from x0 at t[0].
    void path(double x0, const double* t, const double* w, std::size_t count, double* out) const;
    /// Final state after count - 1 steps.
    double final_value(double x0, const double* t, const double* w, std::size_t count) const;

    Scheme scheme() const noexcept { return scheme_; }
    const SdeModel& model() const noexcept { return model_; }
    const std::shared_ptr<const TransformG>& transform() const noexcept { return transform_; }

private:
    template <class Sink>
    double run(double x0, const double* t, const double* w, std::size_t count, Sink&& sink) const;

    SdeModel model_;
    Scheme scheme_;
    std::shared_ptr<const TransformG> transform_;
    bool transformed_ = false;  // a non-identity transform is applied
    // Constant (mu, sigma): every scheme reduces to x0 + mu t + sigma W, evaluated directly.
    std::optional<std::pair<double, double>> additive_;
};

/// Transformed Milstein when a transform is given, plain Milstein otherwise.
Stepper reference_stepper(const SdeModel& model, std::shared_ptr<const TransformG> transform);

SolutionPath euler_maruyama(const SdeModel& model, double x0, const PathLattice& driver);
SolutionPath milstein(const SdeModel& model, double x0, const PathLattice& driver);
SolutionPath transformed_milstein(const SdeModel& model, const TransformG& transform, double x0,
                                  const PathLattice& driver);

/// x_prev + sigma(x_prev) (W_t - W_{t_prev}) on the segment; segment_values[0] is W_{t_prev}.
std::vector<double> frozen_coefficient_step(const SdeModel& model, double x_prev,
                                            const std::vector<double>& segment_values);

struct ExitResult {
    SolutionPath path;
    double exit_time = 0.0;
    bool exited = false;
};

/**
 * Runs the scheme and stops at the first lattice time whose state leaves
 * the open interval (a, b); later states are frozen at the exit value.
 */
ExitResult solve_until_exit(const SdeModel& model, double x0, const PathLattice& driver,
                            std::pair<double, double> interval, Scheme scheme,
                            std::shared_ptr<const TransformG> transform = nullptr);

}  // namespace sdelab
