#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "sdelab/coefficients.hpp"
#include "sdelab/noise.hpp"
#include "sdelab/transforms.hpp"

namespace sdelab {

struct CouplingExperimentConfig {
    SdeModel model;
    /// Jump-removing transform; identity when null.
    std::shared_ptr<const TransformG> transform;
    std::vector<double> coarse_times;  // 0 = t_0 < ... < t_n = T
    std::size_t m = 64;                 // fine substeps per coarse interval
    std::size_t replications = 10000;
    double p = 2.0;
    std::uint64_t seed = 1;
    CouplingKind kind = CouplingKind::IndependentResample;
    /// Exchange the roles of W and Wtilde.
    bool swap_roles = false;

    /// Uniform coarse grid with n intervals on [0, model.horizon].
    static CouplingExperimentConfig uniform(SdeModel model, std::size_t n,
                                            std::shared_ptr<const TransformG> transform = nullptr);

    std::size_t intervals() const noexcept { return coarse_times.size() - 1; }
    /// Checks times, t_n = T, the mesh bound t_i - t_{i-1} <= 2T/n, m, R and p.
    void validate() const;
};

struct DistanceEstimate {
    double estimate = 0.0;    // (E|.|^p)^{1/p}, or a plain mean where noted
    double std_error = 0.0;
    double mean_power = 0.0;  // E|.|^p
    double mean_power_se = 0.0;
    std::size_t replications = 0;
    std::vector<double> per_interval;
    std::vector<double> per_interval_se;
};

/// (E|X_T - Xtilde_T|^p)^{1/p} under the configured coupling, reference scheme on the fine lattice.
DistanceEstimate global_coupling_distance(const CouplingExperimentConfig& cfg);

/**
 * E|Y_{t_i} - Ytilde^{(i)}|^2 per coarse interval, where Ytilde^{(i)} restarts
 * from Y_{t_{i-1}} under the coupled increments. `estimate` is the sum.
 */
DistanceEstimate local_coupling_distances(const CouplingExperimentConfig& cfg);

struct RecursionReport {
    std::vector<double> global;          // D_i, i = 0..n
    std::vector<double> global_se;
    std::vector<double> cross;           // m_i, i = 1..n
    std::vector<double> increment;       // d_i
    std::vector<double> local;           // L_i
    std::vector<double> local_se;
    std::vector<double> residual;        // D_i - D_{i-1} - 2 m_i - d_i
    std::vector<double> residual_se;
    bool identity_holds = false;         // |residual| <= 5 SE + 1e-12 for every i
    double c1 = 0.0;
    double c2 = 0.0;                     // min over qualifying intervals
    std::size_t qualifying_intervals = 0;
    double ratio = 0.0;                  // D_n / sum L_i
    double ratio_ci_low = 0.0;           // bootstrap 95%
    double ratio_ci_high = 0.0;
};

RecursionReport check_recursion_bounds(const CouplingExperimentConfig& cfg,
                                       std::size_t bootstrap = 1000);

struct OccupationReport {
    std::vector<double> local;     // L_i
    std::vector<double> local_se;
    std::vector<double> weight;    // q_i = Delta_i^2 P(X_{t_{i-1}} in [xi - sqrt(Delta_i), xi + sqrt(Delta_i)])
    std::vector<double> weight_se;
    std::vector<std::size_t> qualifying;  // intervals with q_i > 10 SE
    bool inconclusive = true;
    double c_hat = 0.0;
    double c_hat_q05 = 0.0;        // bootstrap 5% quantile
    bool positive_at_95 = false;
};

OccupationReport occupation_lower_bound_check(const CouplingExperimentConfig& cfg, double xi,
                                              std::size_t bootstrap = 1000);

struct L1GapEstimate {
    DistanceEstimate gap;
    double min_abs_diffusion = 0.0;  // min |sigma(X_{t_{i-1}})| over visited coarse states
};

/// Sum over coarse intervals of the L1 distance between the frozen-coefficient
/// proxies driven by W and by its negation coupling.
L1GapEstimate global_l1_coupling_gap(const CouplingExperimentConfig& cfg);

struct OracleReport {
    double error2 = 0.0;  // E[Var(X_T | coarse values)]
    double error2_se = 0.0;
    double error = 0.0;
    DistanceEstimate global;  // squared distance in mean_power
    double identity_ratio = 0.0;
    double identity_ratio_se = 0.0;
    std::size_t inner = 0;
};

/// Nested Monte Carlo conditional expectation given the coarse Brownian values.
OracleReport conditional_expectation_oracle(const CouplingExperimentConfig& cfg, std::size_t inner);

}  // namespace sdelab
