#include "sdelab/couplings.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sdelab/errors.hpp"
#include "sdelab/estimation.hpp"
#include "sdelab/parallel.hpp"
#include "sdelab/rng.hpp"
#include "sdelab/solvers.hpp"

namespace sdelab {

CouplingExperimentConfig CouplingExperimentConfig::uniform(SdeModel model, std::size_t n,
                                                           std::shared_ptr<const TransformG> transform) {
    CouplingExperimentConfig cfg;
    cfg.coarse_times = uniform_times(model.horizon, n);
    cfg.model = std::move(model);
    cfg.transform = std::move(transform);
    return cfg;
}

namespace {

bool has_drift_jump(const SdeModel& model) {
    for (double b : model.drift->breakpoints()) {
        if (std::abs(model.drift->value(b, Side::Right) - model.drift->value(b, Side::Left)) >
            AssumptionReport::jump_tolerance) {
            return true;
        }
    }
    return false;
}

}  // namespace

void CouplingExperimentConfig::validate() const {
    model.validate();
    const auto& t = coarse_times;
    if (t.size() < 2) throw ValidationError("coarse grid needs at least one interval");
    if (t.front() != 0.0) throw ValidationError("coarse grid must start at 0");
    if (t.back() != model.horizon) throw ValidationError("coarse grid must end at the horizon");
    const double n = static_cast<double>(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) throw ValidationError("coarse grid not strictly increasing");
        if (t[i] - t[i - 1] > 2.0 * model.horizon / n * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "coarse interval " << i << " longer than 2T/n";
            throw ValidationError(msg.str());
        }
    }
    if (m == 0) throw ValidationError("m must be positive");
    if (replications < 2) throw ValidationError("need at least two replications");
    if (!(p > 0.0)) throw ValidationError("p must be positive");
    if ((!transform || transform->is_identity()) && has_drift_jump(model)) {
        throw ValidationError("discontinuous drift requires a jump-removing transform");
    }
}

namespace {

/// Shared per-experiment setup: fine lattice, coarse positions and the reference scheme.
class Harness {
public:
    explicit Harness(const CouplingExperimentConfig& cfg)
        : cfg_(cfg),
          fine_(refine_uniformly(cfg.coarse_times, cfg.m)),
          coarse_(coarse_positions(cfg.intervals(), cfg.m)),
          stepper_(reference_stepper(cfg.model, cfg.transform)) {
        cfg.validate();
    }

    struct Drivers {
        BridgeDecomposition decomp;
        PathLattice w;
        PathLattice wt;
    };

    Drivers drivers(std::size_t r) const {
        const StreamFamily family{cfg_.seed, r};
        RngStream stream = family.stream(Purpose::Driver);
        Drivers d;
        d.w = sample_brownian_lattice(stream, fine_);
        d.decomp = bridge_decompose(d.w, coarse_);
        d.wt = couple(d.decomp, family, cfg_.kind);
        if (cfg_.swap_roles) std::swap(d.w.values, d.wt.values);
        return d;
    }

    double final_value(double x0, const PathLattice& w, std::size_t lo, std::size_t hi) const {
        return stepper_.final_value(x0, w.times.data() + lo, w.values.data() + lo, hi - lo + 1);
    }

    void path(double x0, const PathLattice& w, std::vector<double>& out) const {
        out.resize(w.size());
        stepper_.path(x0, w.times.data(), w.values.data(), w.size(), out.data());
    }

    double to_y(double x) const { return cfg_.transform ? cfg_.transform->value(x) : x; }

    const std::vector<std::size_t>& coarse() const noexcept { return coarse_; }
    std::size_t last() const noexcept { return fine_.size() - 1; }
    std::size_t n() const noexcept { return cfg_.intervals(); }

private:
    const CouplingExperimentConfig& cfg_;
    std::vector<double> fine_;
    std::vector<std::size_t> coarse_;
    Stepper stepper_;
};

DistanceEstimate power_mean(const std::vector<double>& samples, double p) {
    DistanceEstimate e;
    const auto s = summarize(samples);
    e.replications = s.count;
    e.mean_power = s.mean;
    e.mean_power_se = s.std_error;
    e.estimate = std::pow(s.mean, 1.0 / p);
    e.std_error = s.mean > 0.0 ? std::pow(s.mean, 1.0 / p - 1.0) * s.std_error / p : 0.0;
    return e;
}

/// Column c of a row-major R x k table.
std::vector<double> column(const std::vector<double>& table, std::size_t k, std::size_t c) {
    const std::size_t rows = table.size() / k;
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = table[r * k + c];
    return out;
}

/// Per-interval local distances |Y_{t_i} - Ytilde^{(i)}|^2 for one replication,
/// given the full reference path x under W. Both sides restart from X_{t_{i-1}}
/// so they share every rounding step up to the driver.
void local_terms(const Harness& h, const Harness::Drivers& d, const std::vector<double>& x,
                 double* out) {
    const auto& c = h.coarse();
    for (std::size_t i = 1; i < c.size(); ++i) {
        const double own = h.final_value(x[c[i - 1]], d.w, c[i - 1], c[i]);
        const double restart = h.final_value(x[c[i - 1]], d.wt, c[i - 1], c[i]);
        const double diff = h.to_y(own) - h.to_y(restart);
        out[i - 1] = diff * diff;
    }
}

}  // namespace

DistanceEstimate global_coupling_distance(const CouplingExperimentConfig& cfg) {
    const Harness h(cfg);
    std::vector<double> samples(cfg.replications);
    for_each_replication(cfg.seed, cfg.replications, [&](std::size_t r) {
        const auto d = h.drivers(r);
        const double x = h.final_value(cfg.model.x0, d.w, 0, h.last());
        const double xt = h.final_value(cfg.model.x0, d.wt, 0, h.last());
        samples[r] = std::pow(std::abs(x - xt), cfg.p);
    });
    return power_mean(samples, cfg.p);
}

DistanceEstimate local_coupling_distances(const CouplingExperimentConfig& cfg) {
    const Harness h(cfg);
    const std::size_t n = h.n();
    std::vector<double> table(cfg.replications * n);
    std::vector<double> sums(cfg.replications);
    for_each_replication(cfg.seed, cfg.replications, [&](std::size_t r) {
        const auto d = h.drivers(r);
        std::vector<double> x;
        h.path(cfg.model.x0, d.w, x);
        local_terms(h, d, x, table.data() + r * n);
        sums[r] = pairwise_sum(std::span<const double>(table.data() + r * n, n));
    });
    DistanceEstimate e;
    const auto total = summarize(sums);
    e.estimate = total.mean;
    e.std_error = total.std_error;
    e.mean_power = total.mean;
    e.mean_power_se = total.std_error;
    e.replications = cfg.replications;
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = summarize(column(table, n, i));
        e.per_interval.push_back(s.mean);
        e.per_interval_se.push_back(s.std_error);
    }
    return e;
}

RecursionReport check_recursion_bounds(const CouplingExperimentConfig& cfg, std::size_t bootstrap) {
    const Harness h(cfg);
    const std::size_t n = h.n();
    const std::size_t R = cfg.replications;
    // Per replication: D_0..D_n, then m_i, d_i, L_i, residual_i for i = 1..n.
    const std::size_t width = (n + 1) + 4 * n;
    std::vector<double> table(R * width);
    for_each_replication(cfg.seed, R, [&](std::size_t r) {
        const auto d = h.drivers(r);
        std::vector<double> x, xt;
        h.path(cfg.model.x0, d.w, x);
        h.path(cfg.model.x0, d.wt, xt);
        double* row = table.data() + r * width;
        const auto& c = h.coarse();
        for (std::size_t i = 0; i <= n; ++i) {
            const double diff = h.to_y(x[c[i]]) - h.to_y(xt[c[i]]);
            row[i] = diff * diff;
        }
        local_terms(h, d, x, row + (n + 1) + 2 * n);
        for (std::size_t i = 1; i <= n; ++i) {
            const double a = h.to_y(x[c[i - 1]]) - h.to_y(xt[c[i - 1]]);
            const double b = (h.to_y(x[c[i]]) - h.to_y(x[c[i - 1]])) -
                             (h.to_y(xt[c[i]]) - h.to_y(xt[c[i - 1]]));
            row[(n + 1) + (i - 1)] = a * b;
            row[(n + 1) + n + (i - 1)] = b * b;
            row[(n + 1) + 3 * n + (i - 1)] = row[i] - row[i - 1] - 2.0 * a * b - b * b;
        }
    });

    RecursionReport rep;
    for (std::size_t i = 0; i <= n; ++i) {
        const auto s = summarize(column(table, width, i));
        rep.global.push_back(s.mean);
        rep.global_se.push_back(s.std_error);
    }
    rep.identity_holds = true;
    for (std::size_t i = 0; i < n; ++i) {
        rep.cross.push_back(summarize(column(table, width, n + 1 + i)).mean);
        rep.increment.push_back(summarize(column(table, width, n + 1 + n + i)).mean);
        const auto l = summarize(column(table, width, n + 1 + 2 * n + i));
        rep.local.push_back(l.mean);
        rep.local_se.push_back(l.std_error);
        const auto res = summarize(column(table, width, n + 1 + 3 * n + i));
        rep.residual.push_back(res.mean);
        rep.residual_se.push_back(res.std_error);
        if (!(std::abs(res.mean) <= 5.0 * res.std_error + 1e-12)) rep.identity_holds = false;
    }

    const double nn = static_cast<double>(n);
    for (std::size_t i = 1; i <= n; ++i) {
        if (rep.global[i - 1] > 0.0) {
            rep.c1 = std::max(rep.c1, nn * (rep.global[i - 1] - rep.global[i]) / rep.global[i - 1]);
        }
    }
    rep.c2 = std::numeric_limits<double>::infinity();
    double local_sum = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        local_sum += rep.local[i - 1];
        if (rep.local[i - 1] > 0.0 && rep.local[i - 1] >= 10.0 * rep.local_se[i - 1]) {
            ++rep.qualifying_intervals;
            rep.c2 = std::min(rep.c2, (rep.global[i] - (1.0 - rep.c1 / nn) * rep.global[i - 1]) /
                                          rep.local[i - 1]);
        }
    }
    if (rep.qualifying_intervals == 0) rep.c2 = 0.0;
    rep.ratio = local_sum > 0.0 ? rep.global[n] / local_sum : 0.0;

    if (bootstrap >= 2 && local_sum > 0.0) {
        std::vector<double> dn(R), ls(R);
        for (std::size_t r = 0; r < R; ++r) {
            dn[r] = table[r * width + n];
            const double* l = table.data() + r * width + (n + 1) + 2 * n;
            ls[r] = pairwise_sum(std::span<const double>(l, n));
        }
        std::vector<double> ratios(bootstrap);
        parallel_for(bootstrap, [&](std::size_t b) {
            RngStream stream(cfg.seed, b, 1, Purpose::Bootstrap);
            double a = 0.0, s = 0.0;
            for (std::size_t k = 0; k < R; ++k) {
                const auto j = static_cast<std::size_t>(stream.uniform() * static_cast<double>(R));
                a += dn[j];
                s += ls[j];
            }
            ratios[b] = s > 0.0 ? a / s : 0.0;
        });
        rep.ratio_ci_low = empirical_quantile(ratios, 0.025);
        rep.ratio_ci_high = empirical_quantile(ratios, 0.975);
    }
    return rep;
}

OccupationReport occupation_lower_bound_check(const CouplingExperimentConfig& cfg, double xi,
                                              std::size_t bootstrap) {
    const Harness h(cfg);
    const std::size_t n = h.n();
    const std::size_t R = cfg.replications;
    std::vector<double> local(R * n), weight(R * n);
    for_each_replication(cfg.seed, R, [&](std::size_t r) {
        const auto d = h.drivers(r);
        std::vector<double> x;
        h.path(cfg.model.x0, d.w, x);
        local_terms(h, d, x, local.data() + r * n);
        const auto& c = h.coarse();
        for (std::size_t i = 1; i <= n; ++i) {
            const double dt = cfg.coarse_times[i] - cfg.coarse_times[i - 1];
            const bool near = std::abs(x[c[i - 1]] - xi) <= std::sqrt(dt);
            weight[r * n + i - 1] = near ? dt * dt : 0.0;
        }
    });

    OccupationReport rep;
    for (std::size_t i = 0; i < n; ++i) {
        const auto l = summarize(column(local, n, i));
        const auto q = summarize(column(weight, n, i));
        rep.local.push_back(l.mean);
        rep.local_se.push_back(l.std_error);
        rep.weight.push_back(q.mean);
        rep.weight_se.push_back(q.std_error);
        if (q.mean > 10.0 * q.std_error) rep.qualifying.push_back(i);
    }
    rep.inconclusive = rep.qualifying.empty();
    if (rep.inconclusive) return rep;

    auto c_hat = [&](const std::vector<std::size_t>& rows) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i : rep.qualifying) {
            double l = 0.0, q = 0.0;
            for (std::size_t r : rows) {
                l += local[r * n + i];
                q += weight[r * n + i];
            }
            best = std::min(best, q > 0.0 ? l / q : std::numeric_limits<double>::infinity());
        }
        return best;
    };
    rep.c_hat = std::numeric_limits<double>::infinity();
    for (std::size_t i : rep.qualifying) rep.c_hat = std::min(rep.c_hat, rep.local[i] / rep.weight[i]);

    std::vector<double> boot(std::max<std::size_t>(bootstrap, 1));
    parallel_for(boot.size(), [&](std::size_t b) {
        RngStream stream(cfg.seed, b, 2, Purpose::Bootstrap);
        std::vector<std::size_t> rows(R);
        for (auto& r : rows) r = static_cast<std::size_t>(stream.uniform() * static_cast<double>(R));
        boot[b] = c_hat(rows);
    });
    rep.c_hat_q05 = empirical_quantile(boot, 0.05);
    rep.positive_at_95 = rep.c_hat_q05 > 0.0;
    return rep;
}

L1GapEstimate global_l1_coupling_gap(const CouplingExperimentConfig& cfg) {
    CouplingExperimentConfig negated = cfg;
    negated.kind = CouplingKind::Negation;
    const Harness h(negated);
    const std::size_t n = h.n();
    std::vector<double> samples(cfg.replications);
    std::vector<double> min_sigma(cfg.replications);
    std::vector<double> table(cfg.replications * n);
    for_each_replication(cfg.seed, cfg.replications, [&](std::size_t r) {
        const auto d = h.drivers(r);
        std::vector<double> x;
        h.path(cfg.model.x0, d.w, x);
        const auto& c = h.coarse();
        const auto& t = d.w.times;
        double low = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i <= n; ++i) {
            const std::size_t lo = c[i - 1];
            const std::size_t hi = c[i];
            const std::vector<double> seg_w(d.w.values.begin() + lo, d.w.values.begin() + hi + 1);
            const std::vector<double> seg_wt(d.wt.values.begin() + lo, d.wt.values.begin() + hi + 1);
            const auto fw = frozen_coefficient_step(cfg.model, x[lo], seg_w);
            const auto fwt = frozen_coefficient_step(cfg.model, x[lo], seg_wt);
            double integral = 0.0;
            for (std::size_t j = 1; j < fw.size(); ++j) {
                const double dt = t[lo + j] - t[lo + j - 1];
                integral += 0.5 * dt * (std::abs(fw[j] - fwt[j]) + std::abs(fw[j - 1] - fwt[j - 1]));
            }
            table[r * n + i - 1] = integral;
            low = std::min(low, std::abs(cfg.model.diffusion->value(x[lo])));
        }
        samples[r] = pairwise_sum(std::span<const double>(table.data() + r * n, n));
        min_sigma[r] = low;
    });
    L1GapEstimate out;
    const auto s = summarize(samples);
    out.gap.estimate = s.mean;
    out.gap.std_error = s.std_error;
    out.gap.mean_power = s.mean;
    out.gap.mean_power_se = s.std_error;
    out.gap.replications = s.count;
    for (std::size_t i = 0; i < n; ++i) {
        const auto col = summarize(column(table, n, i));
        out.gap.per_interval.push_back(col.mean);
        out.gap.per_interval_se.push_back(col.std_error);
    }
    out.min_abs_diffusion = *std::min_element(min_sigma.begin(), min_sigma.end());
    return out;
}

OracleReport conditional_expectation_oracle(const CouplingExperimentConfig& cfg, std::size_t inner) {
    if (inner < 2) throw ValidationError("inner sample count must be at least 2");
    CouplingExperimentConfig resample = cfg;
    resample.kind = CouplingKind::IndependentResample;
    resample.p = 2.0;
    const Harness h(resample);
    std::vector<double> samples(cfg.replications);
    const std::uint64_t seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
    for_each_replication(seed, cfg.replications, [&](std::size_t r) {
        const StreamFamily family{seed, r};
        RngStream stream = family.stream(Purpose::Driver);
        const auto w = sample_brownian_lattice(stream, refine_uniformly(cfg.coarse_times, cfg.m));
        const auto decomp = bridge_decompose(w, h.coarse());
        std::vector<double> finals(inner);
        for (std::size_t j = 0; j < inner; ++j) {
            const auto filled = couple(decomp, family, CouplingKind::IndependentResample, j + 1);
            finals[j] = h.final_value(cfg.model.x0, filled, 0, h.last());
        }
        samples[r] = summarize(finals).variance;
    });
    OracleReport rep;
    rep.inner = inner;
    const auto s = summarize(samples);
    rep.error2 = s.mean;
    rep.error2_se = s.std_error;
    rep.error = std::sqrt(s.mean);
    rep.global = global_coupling_distance(resample);
    const double g = rep.global.mean_power;
    if (g > 0.0) {
        rep.identity_ratio = 2.0 * rep.error2 / g;
        const double rel_e = rep.error2 > 0.0 ? rep.error2_se / rep.error2 : 0.0;
        const double rel_g = rep.global.mean_power_se / g;
        rep.identity_ratio_se = rep.identity_ratio * std::sqrt(rel_e * rel_e + rel_g * rel_g);
    }
    return rep;
}

}  // namespace sdelab
