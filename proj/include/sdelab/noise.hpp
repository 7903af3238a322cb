#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdelab/rng.hpp"

namespace sdelab {

/// Strictly increasing times with one value per time.
struct PathLattice {
    std::vector<double> times;
    std::vector<double> values;

    std::size_t size() const noexcept { return times.size(); }
    double horizon() const { return times.back(); }
    /// Throws ValidationError unless times start at 0, increase strictly and
    /// match values in length.
    void validate() const;
};

enum class CouplingKind { IndependentResample, Negation };

std::string to_string(CouplingKind kind);
CouplingKind coupling_kind_from_string(const std::string& name);

/// W = Wbar + B with Wbar affine between coarse times and B pinned to 0 there.
struct BridgeDecomposition {
    PathLattice fine;
    std::vector<std::size_t> coarse;  // indices into fine.times
    std::vector<double> wbar;
    std::vector<double> bridge;
};

/// t_i = T i / n for i = 0..n.
std::vector<double> uniform_times(double horizon, std::size_t n);

/// Every coarse interval split into m equal substeps; coarse nodes copied exactly.
std::vector<double> refine_uniformly(const std::vector<double>& coarse_times, std::size_t m);

/// Indices of the coarse nodes inside refine_uniformly(coarse, m): 0, m, 2m, ...
std::vector<std::size_t> coarse_positions(std::size_t coarse_intervals, std::size_t m);

PathLattice sample_brownian_lattice(RngStream& stream, const std::vector<double>& times);

/// Value at s of a Brownian bridge from (a, wa) to (b, wb).
double sample_bridge_point(RngStream& stream, double a, double wa, double b, double wb, double s);

/**
 * Inserts new_times (ascending, inside (0, horizon), disjoint from the
 * lattice) one at a time, each drawn from the bridge law between its current
 * neighbours. Existing values are kept.
 */
PathLattice refine_lattice(RngStream& stream, const PathLattice& lattice,
                           const std::vector<double>& new_times);

BridgeDecomposition bridge_decompose(const PathLattice& lattice,
                                     const std::vector<std::size_t>& coarse_indices);

/**
 * Coupled driver Wtilde = Wbar + Btilde. Negation takes Btilde = -B; the
 * resampled bridge on coarse interval k uses family.stream(Bridge, salt * 2^32 + k).
 */
PathLattice couple(const BridgeDecomposition& decomp, const StreamFamily& family,
                   CouplingKind kind, std::uint64_t salt = 0);

/// Fills `out` (size hi - lo + 1) with a bridge pinned to 0 at both ends over
/// times[lo..hi], by midpoint recursion on the index range.
void fill_pinned_bridge(RngStream& stream, const std::vector<double>& times, std::size_t lo,
                        std::size_t hi, double* out);

/// CSV with columns time,W,Wbar,B,Btilde,Wtilde.
void write_path_dump(std::ostream& out, const BridgeDecomposition& decomp,
                     const PathLattice& coupled);

}  // namespace sdelab
