#include "sdelab/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "sdelab/errors.hpp"
#include "sdelab/polynomial.hpp"

namespace sdelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kContinuityTol = 1e-12;

bool nearly_equal(double a, double b) {
    return std::abs(a - b) <= kContinuityTol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

const PiecewisePolynomial& as_piecewise(const CoefficientPtr& c, const char* what) {
    const auto* pp = dynamic_cast<const PiecewisePolynomial*>(c.get());
    if (pp == nullptr) {
        throw PreconditionError(std::string(what) + " must be a piecewise polynomial");
    }
    return *pp;
}

// Representative interior point of the merged piece j.
double piece_probe(const std::vector<double>& bps, std::size_t j) {
    if (bps.empty()) return 0.0;
    if (j == 0) return bps.front() - 1.0;
    if (j == bps.size()) return bps.back() + 1.0;
    return 0.5 * (bps[j - 1] + bps[j]);
}

// Pointwise combination of two piecewise polynomials on merged breakpoints.
PiecewisePolynomial combine(
    const PiecewisePolynomial& a, const PiecewisePolynomial& b,
    const std::function<std::vector<double>(std::span<const double>, std::span<const double>)>& op,
    const std::function<double(double, double)>& pointwise) {
    std::vector<double> bps = a.knots();
    bps.insert(bps.end(), b.knots().begin(), b.knots().end());
    std::sort(bps.begin(), bps.end());
    bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

    std::vector<std::vector<double>> pieces;
    pieces.reserve(bps.size() + 1);
    for (std::size_t j = 0; j <= bps.size(); ++j) {
        const double probe = piece_probe(bps, j);
        const auto& pa = a.pieces()[a.piece_index(probe, Side::At)];
        const auto& pb = b.pieces()[b.piece_index(probe, Side::At)];
        pieces.push_back(op(pa, pb));
    }
    std::vector<std::optional<double>> values(bps.size());
    for (std::size_t k = 0; k < bps.size(); ++k) {
        const auto ia = a.breakpoint_index(bps[k]);
        const auto ib = b.breakpoint_index(bps[k]);
        const bool explicit_a = ia && a.breakpoint_values()[*ia].has_value();
        const bool explicit_b = ib && b.breakpoint_values()[*ib].has_value();
        if (explicit_a || explicit_b) {
            values[k] = pointwise(a.value(bps[k], Side::At), b.value(bps[k], Side::At));
        }
    }
    return PiecewisePolynomial(std::move(bps), std::move(pieces), std::move(values));
}

double piece_sup_abs(const std::vector<double>& p, double lo, double hi) {
    if (std::isinf(lo) || std::isinf(hi)) {
        return poly::degree(p) <= 0 ? std::abs(p.empty() ? 0.0 : p[0]) : kInf;
    }
    return poly::max_abs(p, lo, hi);
}

// sup |p^(order)| over each piece, +inf where unbounded.
std::vector<double> piecewise_sup_derivative(const PiecewisePolynomial& f, int order) {
    std::vector<double> out;
    for (std::size_t j = 0; j < f.pieces().size(); ++j) {
        std::vector<double> d = f.pieces()[j];
        for (int k = 0; k < order; ++k) d = poly::derivative(d);
        const auto [lo, hi] = f.piece_domain(j);
        out.push_back(piece_sup_abs(d, lo, hi));
    }
    return out;
}

// sup |p^(order)| restricted to [lo, hi].
double window_sup_derivative(const PiecewisePolynomial& f, int order, double lo, double hi) {
    double best = 0.0;
    for (std::size_t j = 0; j < f.pieces().size(); ++j) {
        auto [plo, phi] = f.piece_domain(j);
        const double a = std::max(plo, lo);
        const double b = std::min(phi, hi);
        if (a > b) continue;
        std::vector<double> d = f.pieces()[j];
        for (int k = 0; k < order; ++k) d = poly::derivative(d);
        best = std::max(best, piece_sup_abs(d, a, b));
    }
    return best;
}

double window_inf_abs(const PiecewisePolynomial& f, double lo, double hi) {
    double best = kInf;
    for (std::size_t j = 0; j < f.pieces().size(); ++j) {
        auto [plo, phi] = f.piece_domain(j);
        const double a = std::max(plo, lo);
        const double b = std::min(phi, hi);
        if (a > b) continue;
        best = std::min(best, poly::min_abs(f.pieces()[j], a, b));
    }
    // Explicit breakpoint values count as well.
    for (std::size_t k = 0; k < f.knots().size(); ++k) {
        const double x = f.knots()[k];
        if (x >= lo && x <= hi && f.breakpoint_values()[k]) {
            best = std::min(best, std::abs(*f.breakpoint_values()[k]));
        }
    }
    return best;
}

bool continuous_at(const PiecewisePolynomial& f, double x) {
    const double l = f.value(x, Side::Left);
    const double r = f.value(x, Side::Right);
    return nearly_equal(l, r) && nearly_equal(f.value(x, Side::At), r);
}

}  // namespace

PiecewisePolynomial::PiecewisePolynomial(std::vector<double> breakpoints,
                                         std::vector<std::vector<double>> pieces,
                                         std::vector<std::optional<double>> breakpoint_values)
    : breakpoints_(std::move(breakpoints)),
      pieces_(std::move(pieces)),
      breakpoint_values_(std::move(breakpoint_values)) {
    for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
        if (!std::isfinite(breakpoints_[k])) {
            throw ValidationError("breakpoints must be finite");
        }
        if (k > 0 && !(breakpoints_[k] > breakpoints_[k - 1])) {
            throw ValidationError("breakpoints must be strictly increasing");
        }
    }
    if (pieces_.size() != breakpoints_.size() + 1) {
        std::ostringstream os;
        os << "expected " << breakpoints_.size() + 1 << " pieces for " << breakpoints_.size()
           << " breakpoints, got " << pieces_.size();
        throw ValidationError(os.str());
    }
    if (breakpoint_values_.empty()) {
        breakpoint_values_.resize(breakpoints_.size());
    }
    if (breakpoint_values_.size() != breakpoints_.size()) {
        throw ValidationError("breakpoint_values must have one entry per breakpoint");
    }
    for (auto& p : pieces_) {
        if (p.empty()) p.push_back(0.0);
        for (double c : p) {
            if (!std::isfinite(c)) throw ValidationError("polynomial coefficients must be finite");
        }
    }
    for (const auto& v : breakpoint_values_) {
        if (v && !std::isfinite(*v)) throw ValidationError("breakpoint values must be finite");
    }
    first_derivatives_.reserve(pieces_.size());
    second_derivatives_.reserve(pieces_.size());
    for (const auto& p : pieces_) {
        first_derivatives_.push_back(poly::derivative(p));
        second_derivatives_.push_back(poly::derivative(first_derivatives_.back()));
    }
}

PiecewisePolynomial PiecewisePolynomial::constant(double c) {
    return PiecewisePolynomial({}, {{c}});
}

PiecewisePolynomial PiecewisePolynomial::polynomial(std::vector<double> coefficients) {
    return PiecewisePolynomial({}, {std::move(coefficients)});
}

PiecewisePolynomial PiecewisePolynomial::step(double at, double low, double high) {
    return PiecewisePolynomial({at}, {{low}, {high}}, {high});
}

std::size_t PiecewisePolynomial::piece_index(double x, Side side) const noexcept {
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x);
    const auto k = static_cast<std::size_t>(it - breakpoints_.begin());
    if (it != breakpoints_.end() && *it == x) {
        return side == Side::Left ? k : k + 1;
    }
    return k;
}

std::optional<std::size_t> PiecewisePolynomial::breakpoint_index(double x) const noexcept {
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x);
    if (it != breakpoints_.end() && *it == x) {
        return static_cast<std::size_t>(it - breakpoints_.begin());
    }
    return std::nullopt;
}

std::pair<double, double> PiecewisePolynomial::piece_domain(std::size_t piece) const noexcept {
    const double lo = piece == 0 ? -kInf : breakpoints_[piece - 1];
    const double hi = piece == breakpoints_.size() ? kInf : breakpoints_[piece];
    return {lo, hi};
}

double PiecewisePolynomial::value(double x, Side side) const {
    if (side == Side::At && !breakpoints_.empty()) {
        if (const auto k = breakpoint_index(x); k && breakpoint_values_[*k]) {
            return *breakpoint_values_[*k];
        }
    }
    return poly::evaluate(pieces_[piece_index(x, side)], x);
}

double PiecewisePolynomial::evaluate_derivative(double x, Side side, int order) const {
    const std::size_t j = piece_index(x, side);
    return poly::evaluate(order == 1 ? first_derivatives_[j] : second_derivatives_[j], x);
}

double PiecewisePolynomial::slope(double x, Side side) const {
    return evaluate_derivative(x, side, 1);
}

double PiecewisePolynomial::curvature(double x, Side side) const {
    return evaluate_derivative(x, side, 2);
}

void SdeModel::validate() const {
    if (!drift || !diffusion) {
        throw ValidationError("model needs both a drift and a diffusion coefficient");
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ValidationError("horizon must be positive and finite");
    }
    if (!std::isfinite(x0)) {
        throw ValidationError("x0 must be finite");
    }
}

SdeModel make_model(PiecewisePolynomial drift, PiecewisePolynomial diffusion, double x0,
                    double horizon, std::string name) {
    SdeModel m{std::make_shared<const PiecewisePolynomial>(std::move(drift)),
               std::make_shared<const PiecewisePolynomial>(std::move(diffusion)), x0, horizon,
               std::move(name)};
    m.validate();
    return m;
}

double infimum_abs(const PiecewisePolynomial& f, double lo, double hi) {
    return window_inf_abs(f, lo, hi);
}

double eval_one_sided(const PiecewisePolynomial& f, double x, Side side) {
    if (side != Side::At) {
        return f.value(x, side);
    }
    const auto k = f.breakpoint_index(x);
    if (!k) {
        return f.value(x, Side::At);
    }
    if (f.breakpoint_values()[*k]) {
        return *f.breakpoint_values()[*k];
    }
    const double l = f.value(x, Side::Left);
    const double r = f.value(x, Side::Right);
    if (!nearly_equal(l, r)) {
        std::ostringstream os;
        os << "ambiguous value at breakpoint " << x << ": left " << l << ", right " << r;
        throw AmbiguityError(os.str());
    }
    return r;
}

double jump_height(const SdeModel& model, double xi) {
    model.validate();
    const auto has = [xi](const Coefficient& c) {
        const auto b = c.breakpoints();
        return std::find(b.begin(), b.end(), xi) != b.end();
    };
    if (!has(*model.drift) && !has(*model.diffusion)) {
        std::ostringstream os;
        os << xi << " is not a breakpoint of the drift or the diffusion";
        throw PreconditionError(os.str());
    }
    const auto side_value = [&](Side s) {
        const double sigma = model.diffusion->value(xi, s);
        if (sigma == 0.0) {
            throw DegeneracyError("diffusion has a vanishing one-sided limit at the breakpoint");
        }
        return model.drift->value(xi, s) / sigma - 0.5 * model.diffusion->slope(xi, s);
    };
    return side_value(Side::Right) - side_value(Side::Left);
}

AssumptionReport validate_assumptions(const SdeModel& model, LocalizationWindow window) {
    model.validate();
    if (!(window.delta > 0.0)) {
        throw PreconditionError("window radius must be positive");
    }
    const auto& mu = as_piecewise(model.drift, "drift");
    const auto& sigma = as_piecewise(model.diffusion, "diffusion");

    AssumptionReport rep;
    rep.window = window;
    rep.drift_lipschitz = piecewise_sup_derivative(mu, 1);
    rep.diffusion_lipschitz = piecewise_sup_derivative(sigma, 1);

    rep.a1 = std::all_of(rep.drift_lipschitz.begin(), rep.drift_lipschitz.end(),
                         [](double l) { return std::isfinite(l); });

    const bool sigma_continuous =
        std::all_of(sigma.knots().begin(), sigma.knots().end(),
                    [&](double b) { return continuous_at(sigma, b); });
    const bool sigma_lipschitz =
        sigma_continuous && std::all_of(rep.diffusion_lipschitz.begin(),
                                        rep.diffusion_lipschitz.end(),
                                        [](double l) { return std::isfinite(l); });
    const bool sigma_nonzero_at_jumps =
        std::all_of(mu.knots().begin(), mu.knots().end(),
                    [&](double b) { return sigma.value(b, Side::At) != 0.0; });
    rep.a2 = sigma_lipschitz && sigma_nonzero_at_jumps;

    const auto sigma_curv = piecewise_sup_derivative(sigma, 2);
    bool a3 = std::all_of(sigma_curv.begin(), sigma_curv.end(),
                          [](double l) { return std::isfinite(l); });
    for (double b : sigma.knots()) {
        const bool is_drift_bp = mu.breakpoint_index(b).has_value();
        if (!is_drift_bp && !nearly_equal(sigma.slope(b, Side::Left), sigma.slope(b, Side::Right))) {
            a3 = false;
        }
    }
    rep.a3 = a3;

    const double xi = window.xi;
    const double lo = xi - window.delta;
    const double hi = xi + window.delta;

    // (jump1): no further drift discontinuity inside the window apart from xi.
    bool jump1 = true;
    for (double b : mu.knots()) {
        if (b < lo || b > hi || b == xi) continue;
        if (b == lo) {
            jump1 = jump1 && nearly_equal(mu.value(b, Side::At), mu.value(b, Side::Right));
        } else if (b == hi) {
            jump1 = jump1 && nearly_equal(mu.value(b, Side::At), mu.value(b, Side::Left));
        } else {
            jump1 = jump1 && continuous_at(mu, b);
        }
    }
    jump1 = jump1 && std::isfinite(window_sup_derivative(mu, 1, lo, hi));
    rep.jump1 = jump1;

    rep.window_inf_abs_diffusion = window_inf_abs(sigma, lo, hi);
    bool jump2 = rep.window_inf_abs_diffusion > 0.0;
    for (double b : sigma.knots()) {
        if (b < lo || b > hi) continue;
        if (b > lo && b < hi) {
            jump2 = jump2 && continuous_at(sigma, b);
            if (b != xi) {
                jump2 = jump2 && nearly_equal(sigma.slope(b, Side::Left), sigma.slope(b, Side::Right));
            }
        }
    }
    jump2 = jump2 && std::isfinite(window_sup_derivative(sigma, 2, lo, hi));
    rep.jump2 = jump2;

    std::vector<double> window_bps;
    for (double b : mu.knots()) if (b >= lo && b <= hi) window_bps.push_back(b);
    for (double b : sigma.knots()) if (b >= lo && b <= hi) window_bps.push_back(b);
    std::sort(window_bps.begin(), window_bps.end());
    window_bps.erase(std::unique(window_bps.begin(), window_bps.end()), window_bps.end());
    for (double b : window_bps) {
        double h = std::numeric_limits<double>::quiet_NaN();
        try {
            h = jump_height(model, b);
        } catch (const DegeneracyError&) {
        }
        rep.jump_heights.push_back({b, h});
    }
    rep.jump3 = std::any_of(rep.jump_heights.begin(), rep.jump_heights.end(), [](const auto& j) {
        return std::abs(j.height) > AssumptionReport::jump_tolerance;
    });

    for (double b : mu.knots()) {
        try {
            if (std::abs(jump_height(model, b)) > AssumptionReport::jump_tolerance) {
                rep.alpha1 = true;
            }
        } catch (const DegeneracyError&) {
        }
    }
    return rep;
}

double smoothstep(double u) noexcept {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

namespace {

const std::vector<double> kSmoothstep{0.0, 0.0, 0.0, 10.0, -15.0, 6.0};

// S((x - start) / width) as a polynomial in x.
std::vector<double> rising(double start, double width) {
    return poly::compose_affine(kSmoothstep, -start / width, 1.0 / width);
}

std::vector<double> falling(double start, double width) {
    auto p = poly::scale(rising(start, width), -1.0);
    p[0] += 1.0;
    return p;
}

}  // namespace

PiecewisePolynomial plateau_bump(double xi, double r1, double r2) {
    if (!(0.0 < r1 && r1 < r2)) throw ValidationError("bump radii must satisfy 0 < r1 < r2");
    const double w = r2 - r1;
    return PiecewisePolynomial({xi - r2, xi - r1, xi + r1, xi + r2},
                               {{0.0}, rising(xi - r2, w), {1.0}, falling(xi + r1, w), {0.0}});
}

PiecewisePolynomial plateau_ramp(double xi, double r0, double r1) {
    if (!(0.0 < r0 && r0 < r1)) throw ValidationError("ramp radii must satisfy 0 < r0 < r1");
    const double w = r1 - r0;
    return PiecewisePolynomial({xi - r1, xi - r0, xi + r0, xi + r1},
                               {{1.0}, falling(xi - r1, w), {0.0}, rising(xi + r0, w), {1.0}});
}

SdeModel localize_model(const SdeModel& model, double xi, const LocalizationRadii& radii) {
    model.validate();
    if (!(0.0 < radii.inner && radii.inner < radii.r0 && radii.r0 < radii.r1 &&
          radii.r1 < radii.r2 && radii.r2 < radii.outer)) {
        throw ValidationError("localization radii must satisfy 0 < delta* < delta0 < delta1 < delta2 < delta");
    }
    const auto& mu = as_piecewise(model.drift, "drift");
    const auto& sigma = as_piecewise(model.diffusion, "diffusion");
    if (!(window_inf_abs(sigma, xi - radii.outer, xi + radii.outer) > 0.0)) {
        throw DegeneracyError("diffusion must be bounded away from zero on the localization window");
    }
    const double sign = sigma.value(xi, Side::At) > 0.0 ? 1.0 : -1.0;

    const auto eta1 = plateau_bump(xi, radii.r1, radii.r2);
    const auto eta2 = plateau_ramp(xi, radii.r0, radii.r1);

    const auto times = [](std::span<const double> a, std::span<const double> b) {
        return poly::multiply(a, b);
    };
    auto mu_star = combine(eta1, mu, times, [](double a, double b) { return a * b; });
    auto scaled = combine(eta1, sigma, times, [](double a, double b) { return a * b; });
    const PiecewisePolynomial signed_ramp(
        eta2.knots(),
        [&] {
            std::vector<std::vector<double>> p;
            for (const auto& q : eta2.pieces()) p.push_back(poly::scale(q, sign));
            return p;
        }());
    auto sigma_star = combine(
        scaled, signed_ramp,
        [](std::span<const double> a, std::span<const double> b) { return poly::add(a, b); },
        [](double a, double b) { return a + b; });

    SdeModel out{std::make_shared<const PiecewisePolynomial>(std::move(mu_star)),
                 std::make_shared<const PiecewisePolynomial>(std::move(sigma_star)), model.x0,
                 model.horizon, model.name.empty() ? std::string{} : model.name + "-localized"};
    return out;
}

}  // namespace sdelab
