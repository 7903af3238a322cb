#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sdelab {

/// Which one-sided limit to take. `At` is the value at the point itself;
/// on a breakpoint without an explicit value it falls back to the right limit.
enum class Side { Left, Right, At };

/// An evaluable scalar coefficient with finitely many irregular points.
class Coefficient {
public:
    virtual ~Coefficient() = default;

    virtual double value(double x, Side side = Side::At) const = 0;
    virtual double slope(double x, Side side = Side::At) const = 0;
    /// Points where the coefficient or its derivative may be irregular, ascending.
    virtual std::vector<double> breakpoints() const = 0;
};

using CoefficientPtr = std::shared_ptr<const Coefficient>;

/**
 * Piecewise polynomial on the partition of the real line induced by sorted
 * breakpoints xi_1 < ... < xi_k. Piece j covers (xi_j, xi_{j+1}) with
 * xi_0 = -inf and xi_{k+1} = +inf. An explicit value may be attached to each
 * breakpoint.
 */
class PiecewisePolynomial final : public Coefficient {
public:
    PiecewisePolynomial(std::vector<double> breakpoints,
                        std::vector<std::vector<double>> pieces,
                        std::vector<std::optional<double>> breakpoint_values = {});

    static PiecewisePolynomial constant(double c);
    static PiecewisePolynomial polynomial(std::vector<double> coefficients);
    /// low on (-inf, at), high on (at, inf), value `high` at the jump itself.
    static PiecewisePolynomial step(double at, double low, double high);

    double value(double x, Side side = Side::At) const override;
    double slope(double x, Side side = Side::At) const override;
    std::vector<double> breakpoints() const override { return breakpoints_; }

    /// Second derivative, one-sided at breakpoints.
    double curvature(double x, Side side = Side::At) const;

    const std::vector<double>& knots() const noexcept { return breakpoints_; }
    const std::vector<std::vector<double>>& pieces() const noexcept { return pieces_; }
    const std::vector<std::optional<double>>& breakpoint_values() const noexcept {
        return breakpoint_values_;
    }

    /// Index of the piece containing x (x not a breakpoint), or the piece on
    /// the requested side of a breakpoint.
    std::size_t piece_index(double x, Side side) const noexcept;
    /// Index of x in the breakpoint list, if x is a breakpoint.
    std::optional<std::size_t> breakpoint_index(double x) const noexcept;

    /// Closed-form piece domain [lo, hi] (infinite at the ends).
    std::pair<double, double> piece_domain(std::size_t piece) const noexcept;

private:
    double evaluate_derivative(double x, Side side, int order) const;

    std::vector<double> breakpoints_;
    std::vector<std::vector<double>> pieces_;
    std::vector<std::vector<double>> first_derivatives_;
    std::vector<std::vector<double>> second_derivatives_;
    std::vector<std::optional<double>> breakpoint_values_;
};

using PiecewisePolynomialPtr = std::shared_ptr<const PiecewisePolynomial>;

/// dX = mu(X) dt + sigma(X) dW on [0, horizon], X_0 = x0.
struct SdeModel {
    CoefficientPtr drift;
    CoefficientPtr diffusion;
    double x0 = 0.0;
    double horizon = 1.0;
    std::string name;

    /// Throws ValidationError on a missing coefficient or non-positive horizon.
    void validate() const;
};

SdeModel make_model(PiecewisePolynomial drift, PiecewisePolynomial diffusion, double x0,
                    double horizon, std::string name = {});

/// inf |f| over the closed interval [lo, hi], explicit breakpoint values included.
double infimum_abs(const PiecewisePolynomial& f, double lo, double hi);

/// Strict one-sided evaluation: `At` on a breakpoint with disagreeing limits
/// and no explicit value throws AmbiguityError.
double eval_one_sided(const PiecewisePolynomial& f, double x, Side side);

/// Jump of (mu/sigma - sigma'/2) across xi: right limit minus left limit.
double jump_height(const SdeModel& model, double xi);

struct LocalizationWindow {
    double xi = 0.0;
    double delta = 1.0;
};

struct BreakpointJump {
    double position = 0.0;
    double height = 0.0;
};

struct AssumptionReport {
    bool a1 = false;  // drift Lipschitz on every piece
    bool a2 = false;  // diffusion Lipschitz, nonzero at drift breakpoints
    bool a3 = false;  // diffusion derivative Lipschitz between drift breakpoints
    bool jump1 = false;
    bool jump2 = false;
    bool jump3 = false;
    /// Some drift breakpoint anywhere carries a nonzero (mu/sigma - sigma'/2) jump.
    bool alpha1 = false;
    /// Jump heights at every breakpoint inside the closed window.
    std::vector<BreakpointJump> jump_heights;
    std::vector<double> drift_lipschitz;      // per drift piece, +inf if unbounded
    std::vector<double> diffusion_lipschitz;  // per diffusion piece
    double window_inf_abs_diffusion = 0.0;
    LocalizationWindow window;

    static constexpr double jump_tolerance = 1e-12;
};

/// Decides (A1)-(A3) and (jump1)-(jump3) exactly from the piecewise
/// polynomial representation. Both coefficients must be PiecewisePolynomial.
AssumptionReport validate_assumptions(const SdeModel& model, LocalizationWindow window);

struct LocalizationRadii {
    double inner = 0.1;  // delta*
    double r0 = 0.2;     // eta2 vanishes inside
    double r1 = 0.3;     // eta1 = 1 inside, eta2 = 1 outside
    double r2 = 0.4;     // eta1 vanishes outside
    double outer = 0.5;  // delta, the regularity window
};

/// Quintic smoothstep 6u^5 - 15u^4 + 10u^3 clamped to [0, 1].
double smoothstep(double u) noexcept;

/// eta1: 1 on |x - xi| <= r1, 0 for |x - xi| >= r2, smoothstep in between.
PiecewisePolynomial plateau_bump(double xi, double r1, double r2);
/// eta2: 0 on |x - xi| <= r0, 1 for |x - xi| >= r1.
PiecewisePolynomial plateau_ramp(double xi, double r0, double r1);

/**
 * mu* = eta1 mu and sigma* = eta1 sigma + eta2 s, where s is the sign of
 * sigma on the window. Requires strictly ordered radii and sigma bounded
 * away from zero on the closed window.
 */
SdeModel localize_model(const SdeModel& model, double xi, const LocalizationRadii& radii);

}  // namespace sdelab
