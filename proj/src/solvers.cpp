#include "sdelab/solvers.hpp"

#include <cmath>
#include <sstream>

#include "sdelab/errors.hpp"

namespace sdelab {

std::string to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::Euler: return "euler";
        case Scheme::Milstein: return "milstein";
        case Scheme::TransformedMilstein: return "transformed-milstein";
    }
    return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
    if (name == "euler") return Scheme::Euler;
    if (name == "milstein") return Scheme::Milstein;
    if (name == "transformed-milstein") return Scheme::TransformedMilstein;
    throw ValidationError("unknown scheme '" + name + "'");
}

namespace {

std::optional<double> constant_value(const Coefficient& f) {
    const auto* p = dynamic_cast<const PiecewisePolynomial*>(&f);
    if (p == nullptr) return std::nullopt;
    const auto piece_value = [](const std::vector<double>& c) -> std::optional<double> {
        for (std::size_t k = 1; k < c.size(); ++k) {
            if (c[k] != 0.0) return std::nullopt;
        }
        return c.empty() ? 0.0 : c[0];
    };
    const auto first = piece_value(p->pieces().front());
    if (!first) return std::nullopt;
    for (const auto& c : p->pieces()) {
        if (piece_value(c) != first) return std::nullopt;
    }
    for (const auto& v : p->breakpoint_values()) {
        if (v && *v != *first) return std::nullopt;
    }
    return first;
}

}  // namespace

Stepper::Stepper(SdeModel model, Scheme scheme, std::shared_ptr<const TransformG> transform)
    : model_(std::move(model)), scheme_(scheme), transform_(std::move(transform)) {
    model_.validate();
    if (scheme_ == Scheme::TransformedMilstein && !transform_) {
        transform_ = std::make_shared<const TransformG>(TransformG::identity());
    }
    transformed_ = scheme_ == Scheme::TransformedMilstein && !transform_->is_identity();
    const auto mu = constant_value(*model_.drift);
    const auto sigma = constant_value(*model_.diffusion);
    if (mu && sigma && !transformed_) additive_ = std::make_pair(*mu, *sigma);
}

template <class Sink>
double Stepper::run(double x0, const double* t, const double* w, std::size_t count,
                    Sink&& sink) const {
    const Coefficient& mu = *model_.drift;
    const Coefficient& sigma = *model_.diffusion;
    double x = x0;
    sink(std::size_t{0}, x);
    if (additive_) {
        const auto [a, s] = *additive_;
        for (std::size_t j = 1; j < count; ++j) {
            x = x0 + a * (t[j] - t[0]) + s * (w[j] - w[0]);
            sink(j, x);
        }
        return x;
    }
    if (transformed_) {
        const TransformG& g = *transform_;
        double y = g.value(x);
        for (std::size_t j = 1; j < count; ++j) {
            const double dt = t[j] - t[j - 1];
            const double dw = w[j] - w[j - 1];
            const double g1 = g.slope(x);
            const double g2 = g.curvature(x, Side::At);
            const double s = sigma.value(x);
            const double drift = g1 * mu.value(x) + 0.5 * g2 * s * s;
            const double diff = g1 * s;
            const double diff_slope = (g2 * s + g1 * sigma.slope(x)) / g1;
            y += drift * dt + diff * dw + 0.5 * diff * diff_slope * (dw * dw - dt);
            if (!std::isfinite(y)) {
                std::ostringstream msg;
                msg << "non-finite state at step " << j;
                throw DivergenceError(msg.str(), j);
            }
            x = g.inverse_near(y, x);
            sink(j, x);
        }
        return x;
    }
    const bool milstein = scheme_ != Scheme::Euler;
    for (std::size_t j = 1; j < count; ++j) {
        const double dt = t[j] - t[j - 1];
        const double dw = w[j] - w[j - 1];
        const double s = sigma.value(x);
        double next = x + mu.value(x) * dt + s * dw;
        if (milstein) next += 0.5 * s * sigma.slope(x) * (dw * dw - dt);
        if (!std::isfinite(next)) {
            std::ostringstream msg;
            msg << "non-finite state at step " << j;
            throw DivergenceError(msg.str(), j);
        }
        x = next;
        sink(j, x);
    }
    return x;
}

void Stepper::path(double x0, const double* t, const double* w, std::size_t count,
                   double* out) const {
    run(x0, t, w, count, [out](std::size_t j, double x) { out[j] = x; });
}

double Stepper::final_value(double x0, const double* t, const double* w, std::size_t count) const {
    return run(x0, t, w, count, [](std::size_t, double) {});
}

Stepper reference_stepper(const SdeModel& model, std::shared_ptr<const TransformG> transform) {
    if (transform && !transform->is_identity()) {
        return Stepper(model, Scheme::TransformedMilstein, std::move(transform));
    }
    return Stepper(model, Scheme::Milstein);
}

namespace {

SolutionPath solve(const Stepper& stepper, double x0, const PathLattice& driver) {
    driver.validate();
    SolutionPath out{driver.times, std::vector<double>(driver.size()), stepper.scheme()};
    stepper.path(x0, driver.times.data(), driver.values.data(), driver.size(), out.values.data());
    return out;
}

}  // namespace

SolutionPath euler_maruyama(const SdeModel& model, double x0, const PathLattice& driver) {
    return solve(Stepper(model, Scheme::Euler), x0, driver);
}

SolutionPath milstein(const SdeModel& model, double x0, const PathLattice& driver) {
    return solve(Stepper(model, Scheme::Milstein), x0, driver);
}

SolutionPath transformed_milstein(const SdeModel& model, const TransformG& transform, double x0,
                                  const PathLattice& driver) {
    return solve(Stepper(model, Scheme::TransformedMilstein,
                         std::make_shared<const TransformG>(transform)),
                 x0, driver);
}

std::vector<double> frozen_coefficient_step(const SdeModel& model, double x_prev,
                                            const std::vector<double>& segment_values) {
    model.validate();
    std::vector<double> out(segment_values.size());
    if (segment_values.empty()) return out;
    const double s = model.diffusion->value(x_prev);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = x_prev + s * (segment_values[j] - segment_values[0]);
    }
    return out;
}

ExitResult solve_until_exit(const SdeModel& model, double x0, const PathLattice& driver,
                            std::pair<double, double> interval, Scheme scheme,
                            std::shared_ptr<const TransformG> transform) {
    const auto [a, b] = interval;
    if (!(x0 > a && x0 < b)) throw PreconditionError("initial value must lie inside the interval");
    ExitResult res;
    res.path = solve(Stepper(model, scheme, std::move(transform)), x0, driver);
    res.exit_time = driver.horizon();
    auto& v = res.path.values;
    for (std::size_t j = 1; j < v.size(); ++j) {
        if (!(v[j] > a && v[j] < b)) {
            res.exited = true;
            res.exit_time = driver.times[j];
            for (std::size_t k = j + 1; k < v.size(); ++k) v[k] = v[j];
            break;
        }
    }
    return res;
}

}  // namespace sdelab
