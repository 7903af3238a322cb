#include "sdelab/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sdelab/errors.hpp"

namespace sdelab {

namespace {

Side flip(Side side) {
    switch (side) {
        case Side::Left: return Side::Right;
        case Side::Right: return Side::Left;
        default: return Side::At;
    }
}

// phi(u) = (1 - u^2)^k and its first two derivatives, zero outside [-1, 1].
struct Profile {
    double phi, d1, d2;
};

Profile profile(double u, int k) {
    const double w = 1.0 - u * u;
    if (w <= 0.0) return {0.0, 0.0, 0.0};
    double wk2 = 1.0;
    for (int j = 2; j < k; ++j) wk2 *= w;
    const double wk1 = wk2 * w;
    const double kk = static_cast<double>(k);
    return {wk1 * w, -2.0 * kk * u * wk1, -2.0 * kk * wk1 + 4.0 * kk * (kk - 1.0) * u * u * wk2};
}

double sgn(double z) { return (z > 0.0) - (z < 0.0); }

}  // namespace

double solve_monotone(const Transform& transform, double y, double guess, double lo, double hi) {
    const double dir = transform.increasing() ? 1.0 : -1.0;
    const double tol = kInverseTolerance * std::max(1.0, std::abs(y));
    auto f = [&](double x) { return dir * (transform.value(x) - y); };

    double flo = f(lo);
    double fhi = f(hi);
    for (int grow = 0; (flo > 0.0 || fhi < 0.0); ++grow) {
        if (grow > 200 || !std::isfinite(flo) || !std::isfinite(fhi)) {
            std::ostringstream msg;
            msg << "cannot bracket preimage of " << y;
            throw RangeError(msg.str());
        }
        const double width = std::max(hi - lo, 1.0);
        if (flo > 0.0) {
            hi = lo;
            fhi = flo;
            lo -= width;
            flo = f(lo);
        } else {
            lo = hi;
            flo = fhi;
            hi += width;
            fhi = f(hi);
        }
    }
    if (std::abs(flo) <= tol) return lo;
    if (std::abs(fhi) <= tol) return hi;

    double x = std::clamp(guess, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double fx = f(x);
        if (std::abs(fx) <= tol) return x;
        if (fx < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double d = dir * transform.slope(x);
        double next = d > 0.0 ? x - fx / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
            return std::abs(f(lo)) < std::abs(f(hi)) ? lo : hi;
        }
        x = next;
    }
    return x;
}

double invert_transform(const Transform& transform, double y) { return transform.inverse(y); }

// ---------------------------------------------------------------- G

TransformG::TransformG(std::vector<JumpBump> bumps, int profile_power)
    : bumps_(std::move(bumps)), power_(profile_power) {
    if (power_ < 2) throw ValidationError("bump profile power must be at least 2");
    std::sort(bumps_.begin(), bumps_.end(),
              [](const JumpBump& a, const JumpBump& b) { return a.center < b.center; });
    for (std::size_t i = 0; i < bumps_.size(); ++i) {
        const auto& b = bumps_[i];
        if (!std::isfinite(b.center) || !std::isfinite(b.strength) || !(b.radius > 0.0) ||
            !std::isfinite(b.radius)) {
            throw ValidationError("bump needs finite center and strength and a positive radius");
        }
        if (i > 0 && bumps_[i - 1].center + bumps_[i - 1].radius > b.center - b.radius) {
            throw ValidationError("bumps overlap");
        }
    }
    constexpr int kGrid = 20000;
    for (const auto& b : bumps_) {
        for (int j = 0; j <= kGrid; ++j) {
            const double x = b.center - b.radius + 2.0 * b.radius * j / kGrid;
            min_slope_ = std::min(min_slope_, slope(x));
        }
    }
    if (!(min_slope_ > 0.0)) {
        std::ostringstream msg;
        msg << "G is not increasing (min slope " << min_slope_ << "); choose smaller bump radii";
        throw ConstructionError(msg.str());
    }
}

const JumpBump* TransformG::bump_at(double x) const noexcept {
    auto it = std::upper_bound(bumps_.begin(), bumps_.end(), x,
                               [](double v, const JumpBump& b) { return v < b.center + b.radius; });
    if (it == bumps_.end() || x <= it->center - it->radius) return nullptr;
    return &*it;
}

double TransformG::value(double x) const {
    const JumpBump* b = bump_at(x);
    if (b == nullptr) return x;
    const double z = x - b->center;
    return x + b->strength * z * std::abs(z) * profile(z / b->radius, power_).phi;
}

double TransformG::slope(double x) const {
    const JumpBump* b = bump_at(x);
    if (b == nullptr) return 1.0;
    const double z = x - b->center;
    const auto p = profile(z / b->radius, power_);
    return 1.0 + b->strength * (2.0 * std::abs(z) * p.phi + z * std::abs(z) * p.d1 / b->radius);
}

double TransformG::curvature(double x, Side side) const {
    const JumpBump* b = bump_at(x);
    if (b == nullptr) return 0.0;
    const double z = x - b->center;
    const double nu = b->radius;
    const auto p = profile(z / nu, power_);
    const double s = z == 0.0 ? (side == Side::Left ? -1.0 : 1.0) : sgn(z);
    return b->strength *
           (2.0 * s * p.phi + 4.0 * std::abs(z) * p.d1 / nu + z * std::abs(z) * p.d2 / (nu * nu));
}

double TransformG::inverse(double y) const {
    if (!std::isfinite(y)) throw RangeError("cannot invert a non-finite value");
    const JumpBump* b = bump_at(y);
    if (b == nullptr) return y;
    return solve_monotone(*this, y, y, b->center - b->radius, b->center + b->radius);
}

double TransformG::inverse_near(double y, double guess) const {
    if (!std::isfinite(y)) throw RangeError("cannot invert a non-finite value");
    const JumpBump* b = bump_at(y);
    if (b == nullptr) return y;
    const double lo = b->center - b->radius;
    const double hi = b->center + b->radius;
    const double tol = kInverseTolerance * std::max(1.0, std::abs(y));
    double x = (guess > lo && guess < hi) ? guess : y;
    for (int it = 0; it < 8; ++it) {
        const double f = value(x) - y;
        if (std::abs(f) <= tol) return x;
        x -= f / slope(x);
        if (!(x > lo && x < hi)) break;
    }
    return solve_monotone(*this, y, y, lo, hi);
}

std::vector<double> TransformG::breakpoints() const {
    std::vector<double> out;
    out.reserve(bumps_.size());
    for (const auto& b : bumps_) out.push_back(b.center);
    return out;
}

double profile_slope_bound(int profile_power) {
    // G' - 1 = alpha nu (2|u| phi(u) + u|u| phi'(u)) with u = (x - xi) / nu; the bracket is even in u.
    constexpr int kGrid = 100000;
    const double k = profile_power;
    double bound = 0.0;
    for (int j = 0; j <= kGrid; ++j) {
        const double u = static_cast<double>(j) / kGrid;
        const double base = 1.0 - u * u;
        const double phi = std::pow(base, k);
        const double dphi = -2.0 * k * u * std::pow(base, k - 1.0);
        bound = std::max(bound, std::abs(2.0 * u * phi + u * u * dphi));
    }
    return bound;
}

TransformG build_jump_removal_transform(const SdeModel& model, const JumpRemovalOptions& options) {
    model.validate();
    if (!(options.regularity_radius > 0.0)) {
        throw ValidationError("regularity radius must be positive");
    }
    const auto bps = model.drift->breakpoints();
    const double slope_bound = profile_slope_bound(options.profile_power);
    std::vector<JumpBump> bumps;
    for (std::size_t i = 0; i < bps.size(); ++i) {
        const double xi = bps[i];
        const double jump = model.drift->value(xi, Side::Right) - model.drift->value(xi, Side::Left);
        if (std::abs(jump) <= AssumptionReport::jump_tolerance) continue;
        const double sigma = model.diffusion->value(xi, Side::At);
        if (sigma == 0.0) {
            std::ostringstream msg;
            msg << "diffusion vanishes at drift breakpoint " << xi;
            throw DegeneracyError(msg.str());
        }
        const double alpha = -jump / (2.0 * sigma * sigma);
        double gap = std::numeric_limits<double>::infinity();
        if (i > 0) gap = std::min(gap, xi - bps[i - 1]);
        if (i + 1 < bps.size()) gap = std::min(gap, bps[i + 1] - xi);
        const double nu =
            std::min({0.5 * gap, options.regularity_radius, 1.0 / (2.0 * slope_bound * std::abs(alpha))});
        bumps.push_back({xi, alpha, nu});
    }
    return TransformG(std::move(bumps), options.profile_power);
}

// ---------------------------------------------------------------- H

TransformH::TransformH(CoefficientPtr diffusion, double xi, double delta)
    : diffusion_(std::move(diffusion)), xi_(xi), delta_(delta) {
    if (!diffusion_) throw ValidationError("missing diffusion coefficient");
    if (!(delta_ > 0.0) || !std::isfinite(xi_) || !std::isfinite(delta_)) {
        throw ValidationError("window needs finite center and positive radius");
    }
    const double lo = xi_ - delta_;
    const double hi = xi_ + delta_;
    left_value_ = diffusion_->value(lo, Side::Right);
    right_value_ = diffusion_->value(hi, Side::Left);

    knots_.push_back(lo);
    for (double b : diffusion_->breakpoints()) {
        if (b > lo && b < hi) knots_.push_back(b);
    }
    knots_.push_back(hi);

    double inf_abs = std::numeric_limits<double>::infinity();
    if (const auto* pp = dynamic_cast<const PiecewisePolynomial*>(diffusion_.get())) {
        inf_abs = infimum_abs(*pp, lo, hi);
    } else {
        for (int j = 0; j <= 10000; ++j) {
            inf_abs = std::min(inf_abs, std::abs(diffusion_->value(lo + (hi - lo) * j / 10000.0)));
        }
    }
    if (!(inf_abs > 0.0)) {
        throw DegeneracyError("diffusion vanishes on the Lamperti window");
    }
    sign_ = left_value_ > 0.0 ? 1.0 : -1.0;

    knot_primitive_.assign(knots_.size(), 0.0);
    auto reciprocal = [this](double z) { return 1.0 / diffusion_->value(z); };
    for (std::size_t k = 1; k < knots_.size(); ++k) {
        knot_primitive_[k] = knot_primitive_[k - 1] +
                             boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                                 reciprocal, knots_[k - 1], knots_[k], 15, 1e-13);
    }
    anchor_ = primitive(0.0);
}

double TransformH::primitive(double x) const {
    const double lo = knots_.front();
    const double hi = knots_.back();
    if (x <= lo) return (x - lo) / left_value_;
    if (x >= hi) return knot_primitive_.back() + (x - hi) / right_value_;
    const auto k = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), x) -
                                            knots_.begin()) - 1;
    if (x == knots_[k]) return knot_primitive_[k];
    auto reciprocal = [this](double z) { return 1.0 / diffusion_->value(z); };
    return knot_primitive_[k] + boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                                    reciprocal, knots_[k], x, 15, 1e-13);
}

double TransformH::continuation(double x, Side side) const {
    if (x < knots_.front() || (x == knots_.front() && side == Side::Left)) return left_value_;
    if (x > knots_.back() || (x == knots_.back() && side != Side::Left)) return right_value_;
    return diffusion_->value(x, side);
}

double TransformH::value(double x) const { return primitive(x) - anchor_; }

double TransformH::slope(double x) const { return 1.0 / continuation(x, Side::At); }

double TransformH::curvature(double x, Side side) const {
    const double lo = knots_.front();
    const double hi = knots_.back();
    if (x < lo || x > hi) return 0.0;
    if (x == lo && side == Side::Left) return 0.0;
    if (x == hi && side != Side::Left) return 0.0;
    const Side inner = x == lo ? Side::Right : (x == hi ? Side::Left : side);
    const double s = diffusion_->value(x, inner);
    return -diffusion_->slope(x, inner) / (s * s);
}

double TransformH::inverse(double y) const {
    if (!std::isfinite(y)) throw RangeError("cannot invert a non-finite value");
    const double lo = knots_.front();
    const double hi = knots_.back();
    const double hl = value(lo);
    const double hr = value(hi);
    const double x_left = lo + (y - hl) * left_value_;
    if (x_left <= lo) return x_left;
    const double x_right = hi + (y - hr) * right_value_;
    if (x_right >= hi) return x_right;
    const double guess = lo + (hi - lo) * (y - hl) / (hr - hl);
    return solve_monotone(*this, y, guess, lo, hi);
}

std::vector<double> TransformH::breakpoints() const { return knots_; }

TransformH lamperti_transform(const SdeModel& model, double xi, double delta) {
    model.validate();
    TransformH h(model.diffusion, xi, delta);
    const double ya = h.value(xi - delta);
    const double yb = h.value(xi + delta);
    constexpr int kGrid = 1000;
    for (int j = 0; j <= kGrid; ++j) {
        const double y = ya + (yb - ya) * j / kGrid;
        const double x = h.inverse(y);
        const double normalized = h.slope(x) * h.continuation(x);
        if (!(std::abs(normalized - 1.0) <= 1e-8)) {
            std::ostringstream msg;
            msg << "Lamperti normalization fails at y = " << y << ": " << normalized;
            throw CertificationError(msg.str());
        }
    }
    return h;
}

// ---------------------------------------------------------------- composition

ComposedTransform::ComposedTransform(TransformPtr outer, TransformPtr inner)
    : outer_(std::move(outer)), inner_(std::move(inner)) {
    if (!outer_ || !inner_) throw ValidationError("composition needs two transforms");
}

double ComposedTransform::value(double z) const { return outer_->value(inner_->inverse(z)); }

double ComposedTransform::slope(double z) const {
    const double x = inner_->inverse(z);
    return outer_->slope(x) / inner_->slope(x);
}

double ComposedTransform::curvature(double z, Side side) const {
    const double x = inner_->inverse(z);
    const Side sx = inner_->increasing() ? side : flip(side);
    const double i1 = inner_->slope(x);
    return (outer_->curvature(x, sx) * i1 - outer_->slope(x) * inner_->curvature(x, sx)) /
           (i1 * i1 * i1);
}

double ComposedTransform::inverse(double y) const { return inner_->value(outer_->inverse(y)); }

std::vector<double> ComposedTransform::breakpoints() const {
    std::vector<double> out;
    for (double b : inner_->breakpoints()) out.push_back(inner_->value(b));
    for (double b : outer_->breakpoints()) out.push_back(inner_->value(b));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------- transformed coefficients

namespace {

std::vector<double> mapped_breakpoints(const Transform& t, const SdeModel& model) {
    std::vector<double> xs = model.drift->breakpoints();
    for (double b : model.diffusion->breakpoints()) xs.push_back(b);
    for (double b : t.breakpoints()) xs.push_back(b);
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(t.value(x));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

TransformedDrift::TransformedDrift(TransformPtr transform, SdeModel model)
    : transform_(std::move(transform)), model_(std::move(model)) {}

double TransformedDrift::value(double y, Side side) const {
    const double x = transform_->inverse(y);
    const Side sx = transform_->increasing() ? side : flip(side);
    const double s = model_.diffusion->value(x, sx);
    return transform_->slope(x) * model_.drift->value(x, sx) +
           0.5 * transform_->curvature(x, sx) * s * s;
}

double TransformedDrift::slope(double y, Side side) const {
    const double h = 1e-7 * std::max(1.0, std::abs(y));
    if (side == Side::Left) return (value(y, Side::Left) - value(y - h, Side::Left)) / h;
    return (value(y + h, Side::Right) - value(y, Side::Right)) / h;
}

std::vector<double> TransformedDrift::breakpoints() const {
    return mapped_breakpoints(*transform_, model_);
}

TransformedDiffusion::TransformedDiffusion(TransformPtr transform, SdeModel model)
    : transform_(std::move(transform)), model_(std::move(model)) {}

double TransformedDiffusion::value(double y, Side side) const {
    const double x = transform_->inverse(y);
    const Side sx = transform_->increasing() ? side : flip(side);
    return transform_->slope(x) * model_.diffusion->value(x, sx);
}

double TransformedDiffusion::slope(double y, Side side) const {
    const double x = transform_->inverse(y);
    const Side sx = transform_->increasing() ? side : flip(side);
    const double g1 = transform_->slope(x);
    return (transform_->curvature(x, sx) * model_.diffusion->value(x, sx) +
            g1 * model_.diffusion->slope(x, sx)) /
           g1;
}

std::vector<double> TransformedDiffusion::breakpoints() const {
    return mapped_breakpoints(*transform_, model_);
}

SdeModel transformed_coefficients(const TransformPtr& transform, const SdeModel& model) {
    model.validate();
    if (!transform) throw ValidationError("missing transform");
    if (transform->is_identity()) return model;
    SdeModel out;
    out.drift = std::make_shared<TransformedDrift>(transform, model);
    out.diffusion = std::make_shared<TransformedDiffusion>(transform, model);
    out.x0 = transform->value(model.x0);
    out.horizon = model.horizon;
    out.name = model.name.empty() ? std::string("transformed") : model.name + "/transformed";
    return out;
}

double lipschitz_certificate(const std::function<double(double)>& f, double a, double b,
                             std::size_t grid_size) {
    if (grid_size < 2) throw ValidationError("grid needs at least two points");
    if (!(b > a)) throw ValidationError("interval must have positive length");
    const double h = (b - a) / static_cast<double>(grid_size - 1);
    double prev = f(a);
    if (!std::isfinite(prev)) throw CertificationError("non-finite evaluation at grid start");
    double best = 0.0;
    for (std::size_t j = 1; j < grid_size; ++j) {
        const double x = j + 1 == grid_size ? b : a + h * static_cast<double>(j);
        const double v = f(x);
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "non-finite evaluation at x = " << x;
            throw CertificationError(msg.str());
        }
        best = std::max(best, std::abs(v - prev) / h);
        prev = v;
    }
    return best;
}

}  // namespace sdelab
