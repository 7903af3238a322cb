#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "sdelab/coefficients.hpp"

namespace sdelab {

/**
 * Strictly monotone change of state variable with a continuous first
 * derivative and a piecewise continuous weak second derivative.
 */
class Transform {
public:
    virtual ~Transform() = default;

    virtual double value(double x) const = 0;
    virtual double slope(double x) const = 0;
    virtual double curvature(double x, Side side = Side::At) const = 0;
    virtual double inverse(double y) const = 0;
    /// Points where the weak second derivative may jump.
    virtual std::vector<double> breakpoints() const = 0;
    virtual bool increasing() const { return true; }
    virtual bool is_identity() const { return false; }
};

using TransformPtr = std::shared_ptr<const Transform>;

/// Relative tolerance of every inversion: |T(x) - y| <= tol * max(1, |y|).
inline constexpr double kInverseTolerance = 1e-12;

/// Returns x with T(x) = y; equivalent to T.inverse(y).
double invert_transform(const Transform& transform, double y);

/**
 * Bracketed Newton inversion shared by the concrete transforms. The bracket
 * [lo, hi] is widened until it contains the preimage; RangeError if that
 * fails.
 */
double solve_monotone(const Transform& transform, double y, double guess, double lo, double hi);

/// One jump-removing bump: alpha (x - center)|x - center| phi((x - center) / radius).
struct JumpBump {
    double center = 0.0;
    double strength = 0.0;
    double radius = 1.0;
};

/**
 * G(x) = x + sum_i alpha_i (x - xi_i)|x - xi_i| phi((x - xi_i) / nu_i) with
 * the even profile phi(u) = (1 - u^2)^k on [-1, 1] (k = 4 by default).
 * Every bump maps [xi - nu, xi + nu] onto itself, so G is the identity
 * outside the bumps.
 */
class TransformG final : public Transform {
public:
    explicit TransformG(std::vector<JumpBump> bumps, int profile_power = 4);
    static TransformG identity() { return TransformG({}); }

    double value(double x) const override;
    double slope(double x) const override;
    double curvature(double x, Side side = Side::At) const override;
    double inverse(double y) const override;
    /// Newton inversion started at `guess`; falls back to the bracketed solver.
    double inverse_near(double y, double guess) const;
    std::vector<double> breakpoints() const override;
    bool is_identity() const override { return bumps_.empty(); }

    const std::vector<JumpBump>& bumps() const noexcept { return bumps_; }
    int profile_power() const noexcept { return power_; }
    /// Minimum of G' over a dense grid of every bump, certified at construction.
    double min_slope() const noexcept { return min_slope_; }

private:
    const JumpBump* bump_at(double x) const noexcept;

    std::vector<JumpBump> bumps_;
    int power_;
    double min_slope_ = 1.0;
};

/// sup over u in [-1, 1] of |2|u| phi(u) + u|u| phi'(u)| for phi(u) = (1 - u^2)^k.
double profile_slope_bound(int profile_power);

struct JumpRemovalOptions {
    /// Upper bound for every bump radius.
    double regularity_radius = 1.0;
    int profile_power = 4;
};

/**
 * Builds G for every drift breakpoint carrying a jump, with
 * alpha_i = (mu(xi_i-) - mu(xi_i+)) / (2 sigma(xi_i)^2) and
 * nu_i = min(half the gap to the nearest other breakpoint, regularity radius,
 * 1 / (2 K |alpha_i|)), where K = profile_slope_bound(profile_power). The last
 * term keeps G' >= 1/2.
 */
TransformG build_jump_removal_transform(const SdeModel& model, const JumpRemovalOptions& options = {});

/**
 * H(x) = int_0^x dz / sigma*(z), where sigma* continues sigma restricted to
 * [xi - delta, xi + delta] by constants. Evaluated by Gauss-Kronrod
 * quadrature between the breakpoints of sigma inside the window.
 */
class TransformH final : public Transform {
public:
    TransformH(CoefficientPtr diffusion, double xi, double delta);

    double value(double x) const override;
    double slope(double x) const override;
    double curvature(double x, Side side = Side::At) const override;
    double inverse(double y) const override;
    std::vector<double> breakpoints() const override;
    bool increasing() const override { return sign_ > 0.0; }

    /// sigma*, the constant continuation of the windowed diffusion.
    double continuation(double x, Side side = Side::At) const;
    double xi() const noexcept { return xi_; }
    double delta() const noexcept { return delta_; }

private:
    double primitive(double x) const;  // int_{xi - delta}^x 1 / sigma*

    CoefficientPtr diffusion_;
    double xi_;
    double delta_;
    double sign_ = 1.0;
    double left_value_ = 1.0;   // sigma(xi - delta)
    double right_value_ = 1.0;  // sigma(xi + delta)
    std::vector<double> knots_;
    std::vector<double> knot_primitive_;
    double anchor_ = 0.0;  // primitive(0)
};

/// Builds H and checks that (H' sigma) o H^{-1} = 1 on H([xi - delta, xi + delta]).
TransformH lamperti_transform(const SdeModel& model, double xi, double delta);

/**
 * z -> outer(inner^{-1}(z)). Carries the chain-rule derivatives
 * slope = outer'/inner' and curvature = (outer'' inner' - outer' inner'') / inner'^3,
 * all evaluated at inner^{-1}(z).
 */
class ComposedTransform final : public Transform {
public:
    ComposedTransform(TransformPtr outer, TransformPtr inner);

    double value(double z) const override;
    double slope(double z) const override;
    double curvature(double z, Side side = Side::At) const override;
    double inverse(double y) const override;
    std::vector<double> breakpoints() const override;
    bool increasing() const override { return outer_->increasing() == inner_->increasing(); }

private:
    TransformPtr outer_;
    TransformPtr inner_;
};

/// mu~ = (T' mu + T'' sigma^2 / 2) o T^{-1}.
class TransformedDrift final : public Coefficient {
public:
    TransformedDrift(TransformPtr transform, SdeModel model);
    double value(double y, Side side = Side::At) const override;
    /// One-sided difference quotient with step 1e-7 * max(1, |y|).
    double slope(double y, Side side = Side::At) const override;
    std::vector<double> breakpoints() const override;

private:
    TransformPtr transform_;
    SdeModel model_;
};

/// sigma~ = (T' sigma) o T^{-1}.
class TransformedDiffusion final : public Coefficient {
public:
    TransformedDiffusion(TransformPtr transform, SdeModel model);
    double value(double y, Side side = Side::At) const override;
    double slope(double y, Side side = Side::At) const override;
    std::vector<double> breakpoints() const override;

private:
    TransformPtr transform_;
    SdeModel model_;
};

/// Model for Y = T(X); the identity transform returns the input model.
SdeModel transformed_coefficients(const TransformPtr& transform, const SdeModel& model);

/**
 * Largest adjacent difference quotient |f(x_{j+1}) - f(x_j)| / h on a uniform
 * grid of grid_size points over [a, b]. CertificationError on a non-finite
 * evaluation.
 */
double lipschitz_certificate(const std::function<double(double)>& f, double a, double b,
                             std::size_t grid_size);

}  // namespace sdelab
