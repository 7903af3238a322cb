#include "sdelab/adaptive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "sdelab/errors.hpp"
#include "sdelab/estimation.hpp"
#include "sdelab/parallel.hpp"

namespace sdelab {

namespace {

constexpr double kTimeTolerance = 1e-12;

double time_slack(double t) { return kTimeTolerance * std::max(1.0, std::abs(t)); }

}  // namespace

double OutputPath::at(double t) const {
    if (knots.empty()) throw ValidationError("empty output path");
    const double probe = t + time_slack(t);
    auto it = std::upper_bound(knots.begin(), knots.end(), probe);
    if (it == knots.begin()) return values.front();
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

LatticeAccess::LatticeAccess(PathLattice lattice, RngStream stream)
    : lattice_(std::move(lattice)), stream_(std::move(stream)) {
    lattice_.validate();
}

double LatticeAccess::query(double t) {
    const double horizon = lattice_.horizon();
    const double tol = kTimeTolerance * std::max(1.0, horizon);
    if (!(t >= -tol && t <= horizon + tol)) {
        std::ostringstream msg;
        msg << "query time " << t << " outside [0, " << horizon << "]";
        throw RangeError(msg.str());
    }
    auto& times = lattice_.times;
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it != times.end() && *it - t <= tol) return lattice_.values[static_cast<std::size_t>(it - times.begin())];
    if (it != times.begin() && t - *(it - 1) <= tol) {
        return lattice_.values[static_cast<std::size_t>(it - times.begin()) - 1];
    }
    const auto j = static_cast<std::size_t>(it - times.begin());
    const double v = sample_bridge_point(stream_, times[j - 1], lattice_.values[j - 1], times[j],
                                         lattice_.values[j], t);
    times.insert(it, t);
    lattice_.values.insert(lattice_.values.begin() + static_cast<std::ptrdiff_t>(j), v);
    return v;
}

AdaptiveRun run_adaptive(const AdaptiveMethod& method, double x0, LatticeAccess& access,
                         std::size_t cap) {
    if (cap == 0) throw ValidationError("query cap must be at least 1");
    AdaptiveRun run;
    run.data.x0 = x0;
    run.data.horizon = access.lattice().horizon();
    for (;;) {
        if (run.cost >= cap) {
            std::ostringstream msg;
            msg << method.name() << " did not stop within " << cap << " queries";
            throw NonTerminationError(msg.str());
        }
        const double t = method.next_time(run.data);
        const double y = access.query(t);
        run.data.times.push_back(t);
        run.data.values.push_back(y);
        ++run.cost;
        if (method.should_stop(run.data)) break;
    }
    run.output = method.output(run.data);
    return run;
}

CostEstimate mean_cost(const AdaptiveMethod& method, const SdeModel& model, std::size_t replications,
                       std::uint64_t seed, std::size_t cap) {
    model.validate();
    if (replications == 0) throw ValidationError("need at least one replication");
    std::vector<double> costs(replications);
    for_each_replication(seed, replications, [&](std::size_t r) {
        const StreamFamily family{seed, r};
        RngStream driver = family.stream(Purpose::Driver);
        LatticeAccess access(sample_brownian_lattice(driver, {0.0, model.horizon}),
                             family.stream(Purpose::Refinement));
        costs[r] = static_cast<double>(run_adaptive(method, model.x0, access, cap).cost);
    });
    CostEstimate c;
    const auto s = summarize(costs);
    c.mean = s.mean;
    c.std_error = s.std_error;
    c.max = static_cast<std::size_t>(*std::max_element(costs.begin(), costs.end()));
    return c;
}

double l1_distance(const std::vector<double>& times, const std::vector<double>& reference,
                   const OutputPath& output) {
    double total = 0.0;
    double prev = std::abs(reference[0] - output.at(times[0]));
    for (std::size_t j = 1; j < times.size(); ++j) {
        const double cur = std::abs(reference[j] - output.at(times[j]));
        total += 0.5 * (times[j] - times[j - 1]) * (prev + cur);
        prev = cur;
    }
    return total;
}

namespace {

PathLattice experiment_driver(const CouplingExperimentConfig& cfg, std::size_t r) {
    RngStream stream = StreamFamily{cfg.seed, r}.stream(Purpose::Driver);
    return sample_brownian_lattice(stream, refine_uniformly(cfg.coarse_times, cfg.m));
}

DistanceEstimate mean_estimate(const std::vector<double>& samples) {
    const auto s = summarize(samples);
    DistanceEstimate e;
    e.estimate = e.mean_power = s.mean;
    e.std_error = e.mean_power_se = s.std_error;
    e.replications = s.count;
    return e;
}

}  // namespace

DistanceEstimate global_l1_error(const AdaptiveMethod& method, const CouplingExperimentConfig& cfg,
                                 std::size_t cap) {
    cfg.validate();
    const Stepper ref = reference_stepper(cfg.model, cfg.transform);
    std::vector<double> samples(cfg.replications);
    for_each_replication(cfg.seed, cfg.replications, [&](std::size_t r) {
        LatticeAccess access(experiment_driver(cfg, r),
                             StreamFamily{cfg.seed, r}.stream(Purpose::Refinement));
        const auto run = run_adaptive(method, cfg.model.x0, access, cap);
        const auto& w = access.lattice();
        std::vector<double> x(w.size());
        ref.path(cfg.model.x0, w.times.data(), w.values.data(), w.size(), x.data());
        samples[r] = l1_distance(w.times, x, run.output);
    });
    return mean_estimate(samples);
}

DistanceEstimate fixed_grid_euler_l1_error(const CouplingExperimentConfig& cfg, std::size_t n) {
    cfg.validate();
    if (n == 0) throw ValidationError("grid size must be positive");
    const Stepper ref = reference_stepper(cfg.model, cfg.transform);
    const Stepper euler(cfg.model, Scheme::Euler);
    const double horizon = cfg.model.horizon;
    std::vector<double> grid(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        grid[k] = k == 0 ? 0.0 : horizon * static_cast<double>(k) / static_cast<double>(n);
    }
    std::vector<double> samples(cfg.replications);
    for_each_replication(cfg.seed, cfg.replications, [&](std::size_t r) {
        const auto w = experiment_driver(cfg, r);
        std::vector<double> wg(n + 1, 0.0);
        for (std::size_t k = 1; k <= n; ++k) {
            auto it = std::lower_bound(w.times.begin(), w.times.end(), grid[k] - time_slack(grid[k]));
            if (it == w.times.end() || std::abs(*it - grid[k]) > time_slack(grid[k])) {
                throw PreconditionError("fixed grid is not contained in the fine lattice");
            }
            wg[k] = w.values[static_cast<std::size_t>(it - w.times.begin())];
        }
        OutputPath out{grid, std::vector<double>(n + 1)};
        euler.path(cfg.model.x0, grid.data(), wg.data(), n + 1, out.values.data());
        std::vector<double> x(w.size());
        ref.path(cfg.model.x0, w.times.data(), w.values.data(), w.size(), x.data());
        samples[r] = l1_distance(w.times, x, out);
    });
    return mean_estimate(samples);
}

DistanceEstimate final_time_rms_error(const AdaptiveMethod& method, const CouplingExperimentConfig& cfg,
                                      std::size_t cap) {
    cfg.validate();
    const Stepper ref = reference_stepper(cfg.model, cfg.transform);
    std::vector<double> samples(cfg.replications);
    for_each_replication(cfg.seed, cfg.replications, [&](std::size_t r) {
        LatticeAccess access(experiment_driver(cfg, r),
                             StreamFamily{cfg.seed, r}.stream(Purpose::Refinement));
        const auto run = run_adaptive(method, cfg.model.x0, access, cap);
        const auto& w = access.lattice();
        const double x = ref.final_value(cfg.model.x0, w.times.data(), w.values.data(), w.size());
        const double diff = x - run.output.at(cfg.model.horizon);
        samples[r] = diff * diff;
    });
    const auto s = summarize(samples);
    DistanceEstimate e;
    e.mean_power = s.mean;
    e.mean_power_se = s.std_error;
    e.replications = s.count;
    e.estimate = std::sqrt(s.mean);
    e.std_error = s.mean > 0.0 ? 0.5 * s.std_error / e.estimate : 0.0;
    return e;
}

// ---------------------------------------------------------------- built-in methods

namespace {

/// Observed times with 0 prepended, sorted, with the matching Brownian values.
void sorted_grid(const ObservedData& data, std::vector<double>& t, std::vector<double>& w) {
    std::vector<std::size_t> order(data.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return data.times[a] < data.times[b]; });
    t.assign(1, 0.0);
    w.assign(1, 0.0);
    for (std::size_t k : order) {
        if (data.times[k] <= t.back()) continue;
        t.push_back(data.times[k]);
        w.push_back(data.values[k]);
    }
}

OutputPath scheme_output(const Stepper& stepper, const ObservedData& data) {
    OutputPath out;
    std::vector<double> w;
    sorted_grid(data, out.knots, w);
    out.values.resize(out.knots.size());
    stepper.path(data.x0, out.knots.data(), w.data(), out.knots.size(), out.values.data());
    return out;
}

double uniform_time(const ObservedData& data, std::size_t n) {
    const std::size_t k = data.size() + 1;
    if (k >= n) return data.horizon;
    return data.horizon * static_cast<double>(k) / static_cast<double>(n);
}

class UniformMethod final : public AdaptiveMethod {
public:
    UniformMethod(const MethodParameters& p, Scheme scheme)
        : n_(p.n), stepper_(scheme == Scheme::TransformedMilstein
                                ? Stepper(p.model, scheme, p.transform)
                                : Stepper(p.model, scheme)) {
        if (n_ == 0) throw ValidationError("uniform method needs n >= 1");
    }

    std::string name() const override { return "uniform-" + to_string(stepper_.scheme()); }
    double next_time(const ObservedData& data) const override { return uniform_time(data, n_); }
    bool should_stop(const ObservedData& data) const override { return data.size() >= n_; }
    OutputPath output(const ObservedData& data) const override { return scheme_output(stepper_, data); }

private:
    std::size_t n_;
    Stepper stepper_;
};

class LargestIncrementBisection final : public AdaptiveMethod {
public:
    explicit LargestIncrementBisection(const MethodParameters& p)
        : budget_(p.n), stepper_(p.model, Scheme::Euler) {
        if (budget_ == 0) throw ValidationError("bisection needs a positive budget");
    }

    std::string name() const override { return "largest-increment-bisection"; }

    double next_time(const ObservedData& data) const override {
        if (data.size() == 0) return data.horizon;
        std::vector<double> t, w;
        sorted_grid(data, t, w);
        std::size_t best = 1;
        double best_inc = -1.0;
        for (std::size_t k = 1; k < t.size(); ++k) {
            const double inc = std::abs(w[k] - w[k - 1]);
            if (inc > best_inc) {
                best_inc = inc;
                best = k;
            }
        }
        return 0.5 * (t[best - 1] + t[best]);
    }

    bool should_stop(const ObservedData& data) const override { return data.size() >= budget_; }
    OutputPath output(const ObservedData& data) const override { return scheme_output(stepper_, data); }

private:
    std::size_t budget_;
    Stepper stepper_;
};

std::uint64_t hash_data(std::uint64_t seed, const ObservedData& data) {
    std::uint64_t h = mix64(seed, std::bit_cast<std::uint64_t>(data.x0));
    for (std::size_t k = 0; k < data.size(); ++k) {
        h = mix64(h, std::bit_cast<std::uint64_t>(data.times[k]));
        h = mix64(h, std::bit_cast<std::uint64_t>(data.values[k]));
    }
    return h;
}

class ConditionalExpectationOracle final : public AdaptiveMethod {
public:
    explicit ConditionalExpectationOracle(const MethodParameters& p)
        : n_(p.n), m_(p.m), inner_(p.inner), seed_(p.seed),
          stepper_(reference_stepper(p.model, p.transform)) {
        if (n_ == 0 || m_ == 0 || inner_ < 2) {
            throw ValidationError("oracle needs n >= 1, m >= 1 and inner >= 2");
        }
    }

    std::string name() const override { return "conditional-expectation-oracle"; }
    double next_time(const ObservedData& data) const override { return uniform_time(data, n_); }
    bool should_stop(const ObservedData& data) const override { return data.size() >= n_; }

    OutputPath output(const ObservedData& data) const override {
        OutputPath out;
        std::vector<double> w;
        sorted_grid(data, out.knots, w);
        const std::size_t k = out.knots.size() - 1;
        const auto fine = refine_uniformly(out.knots, m_);
        const auto coarse = coarse_positions(k, m_);
        PathLattice wbar{fine, std::vector<double>(fine.size())};
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = coarse[i]; j <= coarse[i + 1]; ++j) {
                const double u = (fine[j] - fine[coarse[i]]) / (fine[coarse[i + 1]] - fine[coarse[i]]);
                wbar.values[j] = u * w[i + 1] + (1.0 - u) * w[i];
            }
        }
        const std::uint64_t key = hash_data(seed_, data);
        std::vector<double> sums(k + 1, 0.0);
        std::vector<double> filled(fine.size()), x(fine.size()), bridge;
        for (std::size_t j = 0; j < inner_; ++j) {
            filled = wbar.values;
            for (std::size_t i = 0; i < k; ++i) {
                RngStream stream(key, j, i, Purpose::Inner);
                bridge.assign(coarse[i + 1] - coarse[i] + 1, 0.0);
                fill_pinned_bridge(stream, fine, coarse[i], coarse[i + 1], bridge.data());
                for (std::size_t q = coarse[i] + 1; q < coarse[i + 1]; ++q) filled[q] += bridge[q - coarse[i]];
            }
            stepper_.path(data.x0, fine.data(), filled.data(), fine.size(), x.data());
            for (std::size_t i = 0; i <= k; ++i) sums[i] += x[coarse[i]];
        }
        out.values.resize(k + 1);
        for (std::size_t i = 0; i <= k; ++i) out.values[i] = sums[i] / static_cast<double>(inner_);
        return out;
    }

private:
    std::size_t n_, m_, inner_;
    std::uint64_t seed_;
    Stepper stepper_;
};

bool same_output(const OutputPath& a, const OutputPath& b) {
    return a.knots == b.knots && a.values == b.values;
}

/// Deterministic pseudo-path used to feed probe data.
double probe_path(double t, int variant) {
    return variant == 0 ? std::sin(3.0 * t) + 0.5 * t : std::cos(5.0 * t) - 1.0 - 0.3 * t;
}

}  // namespace

void check_purity(const AdaptiveMethod& method, double horizon) {
    constexpr std::size_t kProbeQueries = 64;
    auto record = [&](int variant, bool interleave) {
        ObservedData data{variant == 0 ? 0.1 : -0.2, horizon, {}, {}};
        ObservedData other{0.3, horizon, {}, {}};
        std::vector<double> trace;
        for (std::size_t k = 0; k < kProbeQueries; ++k) {
            if (interleave) {
                const double s = method.next_time(other);
                other.times.push_back(s);
                other.values.push_back(probe_path(s, 1 - variant));
                (void)method.should_stop(other);
            }
            const double t = method.next_time(data);
            trace.push_back(t);
            data.times.push_back(t);
            data.values.push_back(probe_path(t, variant));
            const bool stop = method.should_stop(data);
            trace.push_back(stop ? 1.0 : 0.0);
            if (stop) break;
        }
        if (interleave) (void)method.output(other);
        return std::make_pair(trace, method.output(data));
    };
    for (int variant = 0; variant < 2; ++variant) {
        const auto plain = record(variant, false);
        const auto mixed = record(variant, true);
        const auto again = record(variant, false);
        if (plain.first != mixed.first || plain.first != again.first ||
            !same_output(plain.second, mixed.second) || !same_output(plain.second, again.second)) {
            throw ValidationError("method '" + method.name() + "' is not a pure function of its data");
        }
    }
}

MethodPtr make_uniform_method(const MethodParameters& params, Scheme scheme) {
    return std::make_shared<UniformMethod>(params, scheme);
}

MethodPtr make_conditional_expectation_oracle(const MethodParameters& params) {
    return std::make_shared<ConditionalExpectationOracle>(params);
}

MethodPtr make_largest_increment_bisection(const MethodParameters& params) {
    return std::make_shared<LargestIncrementBisection>(params);
}

void MethodRegistry::add(const std::string& name, MethodFactory factory, const MethodParameters& probe) {
    if (name.empty() || !factory) throw ValidationError("method registration needs a name and a factory");
    const MethodPtr instance = factory(probe);
    if (!instance) throw ValidationError("factory for '" + name + "' returned no method");
    check_purity(*instance, probe.model.horizon);
    factories_[name] = std::move(factory);
}

MethodPtr MethodRegistry::create(const std::string& name, const MethodParameters& params) const {
    const auto it = factories_.find(name);
    if (it == factories_.end()) throw ValidationError("unknown method '" + name + "'");
    return it->second(params);
}

std::vector<std::string> MethodRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, factory] : factories_) out.push_back(name);
    return out;
}

MethodRegistry MethodRegistry::builtin() {
    MethodParameters probe;
    probe.model = make_model(PiecewisePolynomial::step(0.0, 0.0, 1.0), PiecewisePolynomial::constant(1.0),
                             0.0, 1.0, "probe");
    probe.transform = std::make_shared<const TransformG>(build_jump_removal_transform(probe.model));
    probe.n = 4;
    probe.m = 4;
    probe.inner = 4;
    MethodRegistry reg;
    reg.add("uniform-euler", [](const MethodParameters& p) { return make_uniform_method(p, Scheme::Euler); }, probe);
    reg.add("uniform-milstein", [](const MethodParameters& p) { return make_uniform_method(p, Scheme::Milstein); }, probe);
    reg.add("uniform-transformed-milstein",
            [](const MethodParameters& p) { return make_uniform_method(p, Scheme::TransformedMilstein); }, probe);
    reg.add("conditional-expectation-oracle", make_conditional_expectation_oracle, probe);
    reg.add("largest-increment-bisection", make_largest_increment_bisection, probe);
    return reg;
}

}  // namespace sdelab
