#pragma once

#include <span>
#include <vector>

namespace sdelab::poly {

// Coefficients are stored in ascending degree: c[0] + c[1] x + c[2] x^2 + ...

inline double evaluate(std::span<const double> c, double x) noexcept {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        acc = acc * x + *it;
    }
    return acc;
}

std::vector<double> derivative(std::span<const double> c);
std::vector<double> multiply(std::span<const double> a, std::span<const double> b);
std::vector<double> add(std::span<const double> a, std::span<const double> b);
std::vector<double> scale(std::span<const double> a, double factor);

/// Coefficients of x -> p(offset + factor * x).
std::vector<double> compose_affine(std::span<const double> c, double offset, double factor);

/// Degree after dropping trailing zeros; -1 for the zero polynomial.
int degree(std::span<const double> c) noexcept;

/// Real roots in the closed interval [lo, hi], ascending. Found by splitting
/// at the roots of the derivative and bisecting each monotone segment.
std::vector<double> roots_in(std::span<const double> c, double lo, double hi);

/// sup |p| over [lo, hi] (endpoints and interior critical points).
double max_abs(std::span<const double> c, double lo, double hi);

/// inf |p| over [lo, hi]; zero if p has a root there.
double min_abs(std::span<const double> c, double lo, double hi);

}  // namespace sdelab::poly
