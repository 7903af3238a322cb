#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sdelab/couplings.hpp"
#include "sdelab/noise.hpp"
#include "sdelab/rng.hpp"
#include "sdelab/solvers.hpp"

namespace sdelab {

/// D_k = (x0, y_1, ..., y_k) together with the times at which y_j was read.
struct ObservedData {
    double x0 = 0.0;
    double horizon = 1.0;
    std::vector<double> times;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

/// Right-continuous step function: value[k] on [knots[k], knots[k+1]), value.back() up to T.
struct OutputPath {
    std::vector<double> knots;
    std::vector<double> values;

    double at(double t) const;
};

/**
 * An algorithm of the adaptive class: a query policy, a stopping rule and
 * an output map, each a pure function of the observed data.
 */
class AdaptiveMethod {
public:
    virtual ~AdaptiveMethod() = default;
    virtual std::string name() const = 0;
    virtual double next_time(const ObservedData& data) const = 0;
    virtual bool should_stop(const ObservedData& data) const = 0;
    virtual OutputPath output(const ObservedData& data) const = 0;
};

using MethodPtr = std::shared_ptr<const AdaptiveMethod>;

/// Reads one Brownian path at arbitrary times, refining it lazily by the bridge law.
class LatticeAccess {
public:
    LatticeAccess(PathLattice lattice, RngStream stream);

    /// Value at t in [0, T]; a time within 1e-12 T of a knot reuses the knot.
    double query(double t);
    const PathLattice& lattice() const noexcept { return lattice_; }

private:
    PathLattice lattice_;
    RngStream stream_;
};

inline constexpr std::size_t kDefaultQueryCap = 1000000;

struct AdaptiveRun {
    OutputPath output;
    std::size_t cost = 0;
    ObservedData data;
};

/// Query, record, then test the stopping rule; NonTerminationError past the cap.
AdaptiveRun run_adaptive(const AdaptiveMethod& method, double x0, LatticeAccess& access,
                         std::size_t cap = kDefaultQueryCap);

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t max = 0;
    bool within_budget(double n) const { return mean <= n; }
};

/// Mean cost over R independent Brownian paths started from the lattice {0, T}.
CostEstimate mean_cost(const AdaptiveMethod& method, const SdeModel& model, std::size_t replications,
                       std::uint64_t seed, std::size_t cap = kDefaultQueryCap);

/// Trapezoid on the lattice nodes of |reference - output|.
double l1_distance(const std::vector<double>& times, const std::vector<double>& reference,
                   const OutputPath& output);

/**
 * E || X - Xhat ||_{L1[0,T]} with X from the reference scheme on the (possibly
 * refined) fine lattice of cfg.
 */
DistanceEstimate global_l1_error(const AdaptiveMethod& method, const CouplingExperimentConfig& cfg,
                                 std::size_t cap = kDefaultQueryCap);

/// Same error for Euler with piecewise-constant interpolation on the uniform
/// n-grid, computed directly on the fine lattice without the adaptive loop.
DistanceEstimate fixed_grid_euler_l1_error(const CouplingExperimentConfig& cfg, std::size_t n);

/// Root-mean-square of X_T - Xhat(T) against the reference scheme.
DistanceEstimate final_time_rms_error(const AdaptiveMethod& method, const CouplingExperimentConfig& cfg,
                                      std::size_t cap = kDefaultQueryCap);

struct MethodParameters {
    SdeModel model;
    std::shared_ptr<const TransformG> transform;
    std::size_t n = 16;       // budget / grid size
    std::size_t m = 64;       // substeps per interval for nested fillings
    std::size_t inner = 64;   // nested samples of the oracle
    std::uint64_t seed = 1;
};

using MethodFactory = std::function<MethodPtr(const MethodParameters&)>;

/**
 * Name -> factory. Registration builds one instance and rejects it unless
 * repeated and interleaved calls on probe data agree exactly.
 */
class MethodRegistry {
public:
    /// Registry preloaded with the built-in methods.
    static MethodRegistry builtin();

    void add(const std::string& name, MethodFactory factory, const MethodParameters& probe);
    MethodPtr create(const std::string& name, const MethodParameters& params) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, MethodFactory> factories_;
};

/// Throws ValidationError when the method is not a pure function of its data.
void check_purity(const AdaptiveMethod& method, double horizon);

MethodPtr make_uniform_method(const MethodParameters& params, Scheme scheme);
MethodPtr make_conditional_expectation_oracle(const MethodParameters& params);
MethodPtr make_largest_increment_bisection(const MethodParameters& params);

}  // namespace sdelab
