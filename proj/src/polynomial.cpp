#include "sdelab/polynomial.hpp"

#include <algorithm>
#include <cmath>

namespace sdelab::poly {

std::vector<double> derivative(std::span<const double> c) {
    if (c.size() <= 1) {
        return {0.0};
    }
    std::vector<double> d(c.size() - 1);
    for (std::size_t k = 1; k < c.size(); ++k) {
        d[k - 1] = static_cast<double>(k) * c[k];
    }
    return d;
}

std::vector<double> multiply(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        return {0.0};
    }
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

std::vector<double> add(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
    return out;
}

std::vector<double> scale(std::span<const double> a, double factor) {
    std::vector<double> out(a.begin(), a.end());
    for (auto& v : out) v *= factor;
    return out;
}

std::vector<double> compose_affine(std::span<const double> c, double offset, double factor) {
    // Horner in polynomial arithmetic: acc = acc * (offset + factor x) + c_k
    const std::vector<double> lin{offset, factor};
    std::vector<double> acc{0.0};
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        acc = multiply(acc, lin);
        acc[0] += *it;
    }
    return acc;
}

int degree(std::span<const double> c) noexcept {
    for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k) {
        if (c[static_cast<std::size_t>(k)] != 0.0) return k;
    }
    return -1;
}

namespace {

double bisect_root(std::span<const double> c, double lo, double hi) {
    double flo = evaluate(c, lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fmid = evaluate(c, mid);
        if (fmid == 0.0) return mid;
        if ((fmid < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> roots_in(std::span<const double> c, double lo, double hi) {
    const int deg = degree(c);
    if (deg <= 0 || lo > hi) {
        return {};
    }
    if (deg == 1) {
        const double r = -c[0] / c[1];
        if (r >= lo && r <= hi) return {r};
        return {};
    }
    // Monotone segments between critical points.
    const auto d = derivative(c.subspan(0, static_cast<std::size_t>(deg) + 1));
    std::vector<double> knots{lo};
    for (double r : roots_in(d, lo, hi)) {
        if (r > knots.back()) knots.push_back(r);
    }
    if (hi > knots.back()) knots.push_back(hi);

    std::vector<double> roots;
    for (std::size_t k = 0; k < knots.size(); ++k) {
        const double fk = evaluate(c, knots[k]);
        if (fk == 0.0) {
            if (roots.empty() || roots.back() != knots[k]) roots.push_back(knots[k]);
            continue;
        }
        if (k + 1 < knots.size()) {
            const double fn = evaluate(c, knots[k + 1]);
            if (fn != 0.0 && (fk < 0.0) != (fn < 0.0)) {
                roots.push_back(bisect_root(c, knots[k], knots[k + 1]));
            }
        }
    }
    return roots;
}

double max_abs(std::span<const double> c, double lo, double hi) {
    double best = std::max(std::abs(evaluate(c, lo)), std::abs(evaluate(c, hi)));
    const auto d = derivative(c);
    for (double r : roots_in(d, lo, hi)) {
        best = std::max(best, std::abs(evaluate(c, r)));
    }
    return best;
}

double min_abs(std::span<const double> c, double lo, double hi) {
    if (!roots_in(c, lo, hi).empty()) {
        return 0.0;
    }
    double best = std::min(std::abs(evaluate(c, lo)), std::abs(evaluate(c, hi)));
    const auto d = derivative(c);
    for (double r : roots_in(d, lo, hi)) {
        best = std::min(best, std::abs(evaluate(c, r)));
    }
    return best;
}

}  // namespace sdelab::poly
