#include "sdelab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "sdelab/errors.hpp"

namespace sdelab {

void PathLattice::validate() const {
    if (times.empty()) throw ValidationError("lattice has no times");
    if (times.size() != values.size()) throw ValidationError("lattice times and values differ in length");
    if (times.front() != 0.0) throw ValidationError("lattice must start at time 0");
    for (std::size_t j = 1; j < times.size(); ++j) {
        if (!(times[j] > times[j - 1])) {
            std::ostringstream msg;
            msg << "lattice times not strictly increasing at index " << j;
            throw ValidationError(msg.str());
        }
    }
}

std::string to_string(CouplingKind kind) {
    return kind == CouplingKind::Negation ? "negation" : "independent-resample";
}

CouplingKind coupling_kind_from_string(const std::string& name) {
    if (name == "negation") return CouplingKind::Negation;
    if (name == "independent-resample") return CouplingKind::IndependentResample;
    throw ValidationError("unknown coupling kind '" + name + "'");
}

std::vector<double> uniform_times(double horizon, std::size_t n) {
    if (n == 0 || !(horizon > 0.0)) throw ValidationError("uniform grid needs n >= 1 and T > 0");
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(n);
    }
    t[n] = horizon;
    return t;
}

std::vector<double> refine_uniformly(const std::vector<double>& coarse_times, std::size_t m) {
    if (coarse_times.size() < 2 || m == 0) throw ValidationError("refinement needs two coarse times and m >= 1");
    std::vector<double> fine;
    fine.reserve((coarse_times.size() - 1) * m + 1);
    for (std::size_t i = 0; i + 1 < coarse_times.size(); ++i) {
        const double a = coarse_times[i];
        const double b = coarse_times[i + 1];
        fine.push_back(a);
        for (std::size_t k = 1; k < m; ++k) {
            fine.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(m));
        }
    }
    fine.push_back(coarse_times.back());
    return fine;
}

std::vector<std::size_t> coarse_positions(std::size_t coarse_intervals, std::size_t m) {
    std::vector<std::size_t> idx(coarse_intervals + 1);
    for (std::size_t i = 0; i <= coarse_intervals; ++i) idx[i] = i * m;
    return idx;
}

PathLattice sample_brownian_lattice(RngStream& stream, const std::vector<double>& times) {
    PathLattice out{times, std::vector<double>(times.size(), 0.0)};
    out.validate();
    for (std::size_t j = 1; j < times.size(); ++j) {
        out.values[j] = out.values[j - 1] + std::sqrt(times[j] - times[j - 1]) * stream.normal();
    }
    return out;
}

double sample_bridge_point(RngStream& stream, double a, double wa, double b, double wb, double s) {
    const double mean = wa + (wb - wa) * (s - a) / (b - a);
    const double var = (s - a) * (b - s) / (b - a);
    return mean + std::sqrt(std::max(var, 0.0)) * stream.normal();
}

PathLattice refine_lattice(RngStream& stream, const PathLattice& lattice,
                           const std::vector<double>& new_times) {
    lattice.validate();
    const double horizon = lattice.horizon();
    for (std::size_t k = 0; k < new_times.size(); ++k) {
        const double s = new_times[k];
        if (!(s > 0.0 && s < horizon)) {
            std::ostringstream msg;
            msg << "refinement time " << s << " outside (0, " << horizon << ")";
            throw RangeError(msg.str());
        }
        if (k > 0 && !(s > new_times[k - 1])) throw ValidationError("refinement times not strictly increasing");
    }
    PathLattice out;
    out.times.reserve(lattice.size() + new_times.size());
    out.values.reserve(lattice.size() + new_times.size());
    std::size_t j = 0;
    for (double s : new_times) {
        while (lattice.times[j] < s) {
            out.times.push_back(lattice.times[j]);
            out.values.push_back(lattice.values[j]);
            ++j;
        }
        if (lattice.times[j] == s) {
            std::ostringstream msg;
            msg << "refinement time " << s << " already on the lattice";
            throw ValidationError(msg.str());
        }
        // Left neighbour is the last placed point (possibly new), right one the next old knot.
        const double v = sample_bridge_point(stream, out.times.back(), out.values.back(),
                                             lattice.times[j], lattice.values[j], s);
        out.times.push_back(s);
        out.values.push_back(v);
    }
    for (; j < lattice.size(); ++j) {
        out.times.push_back(lattice.times[j]);
        out.values.push_back(lattice.values[j]);
    }
    return out;
}

BridgeDecomposition bridge_decompose(const PathLattice& lattice,
                                     const std::vector<std::size_t>& coarse_indices) {
    lattice.validate();
    if (coarse_indices.size() < 2 || coarse_indices.front() != 0 ||
        coarse_indices.back() != lattice.size() - 1) {
        throw ValidationError("coarse indices must include the first and last fine index");
    }
    for (std::size_t k = 1; k < coarse_indices.size(); ++k) {
        if (!(coarse_indices[k] > coarse_indices[k - 1])) {
            throw ValidationError("coarse indices not strictly increasing");
        }
    }
    BridgeDecomposition d;
    d.fine = lattice;
    d.coarse = coarse_indices;
    d.wbar.assign(lattice.size(), 0.0);
    d.bridge.assign(lattice.size(), 0.0);
    const auto& t = lattice.times;
    const auto& w = lattice.values;
    for (std::size_t k = 0; k + 1 < coarse_indices.size(); ++k) {
        const std::size_t lo = coarse_indices[k];
        const std::size_t hi = coarse_indices[k + 1];
        d.wbar[lo] = w[lo];
        for (std::size_t j = lo + 1; j < hi; ++j) {
            const double u = (t[j] - t[lo]) / (t[hi] - t[lo]);
            d.wbar[j] = u * w[hi] + (1.0 - u) * w[lo];
            d.bridge[j] = w[j] - d.wbar[j];
        }
    }
    d.wbar.back() = w.back();
    return d;
}

namespace {

void fill_recursive(RngStream& stream, const std::vector<double>& times, std::size_t base,
                    std::size_t lo, std::size_t hi, double* out) {
    if (hi - lo < 2) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    out[mid - base] = sample_bridge_point(stream, times[lo], out[lo - base], times[hi],
                                          out[hi - base], times[mid]);
    fill_recursive(stream, times, base, lo, mid, out);
    fill_recursive(stream, times, base, mid, hi, out);
}

}  // namespace

void fill_pinned_bridge(RngStream& stream, const std::vector<double>& times, std::size_t lo,
                        std::size_t hi, double* out) {
    out[0] = 0.0;
    out[hi - lo] = 0.0;
    fill_recursive(stream, times, lo, lo, hi, out);
}

PathLattice couple(const BridgeDecomposition& decomp, const StreamFamily& family,
                   CouplingKind kind, std::uint64_t salt) {
    PathLattice out{decomp.fine.times, decomp.wbar};
    if (kind == CouplingKind::Negation) {
        for (std::size_t j = 0; j < out.size(); ++j) out.values[j] -= decomp.bridge[j];
        return out;
    }
    std::vector<double> scratch;
    for (std::size_t k = 0; k + 1 < decomp.coarse.size(); ++k) {
        const std::size_t lo = decomp.coarse[k];
        const std::size_t hi = decomp.coarse[k + 1];
        scratch.assign(hi - lo + 1, 0.0);
        RngStream stream = family.stream(Purpose::Bridge, (salt << 32) | k);
        fill_pinned_bridge(stream, out.times, lo, hi, scratch.data());
        for (std::size_t j = lo + 1; j < hi; ++j) out.values[j] += scratch[j - lo];
    }
    return out;
}

void write_path_dump(std::ostream& out, const BridgeDecomposition& decomp,
                     const PathLattice& coupled) {
    out << "time,W,Wbar,B,Btilde,Wtilde\n";
    out.precision(17);
    for (std::size_t j = 0; j < decomp.fine.size(); ++j) {
        const double wt = coupled.values[j];
        out << decomp.fine.times[j] << ',' << decomp.fine.values[j] << ',' << decomp.wbar[j] << ','
            << decomp.bridge[j] << ',' << (wt - decomp.wbar[j]) << ',' << wt << '\n';
    }
}

}  // namespace sdelab
