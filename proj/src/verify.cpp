#include "sdelab/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include "sdelab/adaptive.hpp"
#include "sdelab/catalog.hpp"
#include "sdelab/errors.hpp"
#include "sdelab/estimation.hpp"
#include "sdelab/experiment.hpp"
#include "sdelab/parallel.hpp"

namespace sdelab {

using nlohmann::json;

std::string to_string(Budget budget) { return budget == Budget::Full ? "full" : "smoke"; }

Budget budget_from_string(const std::string& name) {
    if (name == "full") return Budget::Full;
    if (name == "smoke") return Budget::Smoke;
    throw UsageError("unknown budget '" + name + "' (expected 'full' or 'smoke')");
}

std::vector<int> acceptance_ids() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}; }

double ou_single_interval_distance2(double horizon) {
    const double t = horizon;
    const double sq = (1.0 - std::exp(-2.0 * t)) / 2.0;
    const double lin = 1.0 - std::exp(-t);
    return 2.0 * (sq - lin * lin / t);
}

namespace {

struct Sizes {
    std::size_t replications;
    std::size_t small_replications;  // criteria 5 and 11
    std::size_t localization_paths;
    std::vector<std::size_t> rate_grid;
    std::size_t m;
    std::size_t m_check;
    std::size_t inner;
    std::size_t method_inner;
    std::size_t bootstrap;
    std::size_t steps;
    std::size_t bridge_m;
};

Sizes sizes_for(Budget b) {
    if (b == Budget::Full) {
        return {10000, 4000, 1000, {8, 16, 32, 64, 128, 256, 512}, 64, 128, 64, 32, 1000, 1024, 256};
    }
    return {200, 100, 50, {8, 16, 32}, 16, 32, 8, 4, 50, 128, 64};
}

class Criterion {
public:
    Criterion(int id, std::string title, const VerifyOptions& opt, const Sizes& sz)
        : opt_(opt), sz_(sz) {
        result_.id = id;
        result_.title = std::move(title);
        result_.passed = true;
    }

    void check(bool ok, const std::string& line) {
        result_.passed = result_.passed && ok;
        result_.detail += line + (ok ? " -> PASS" : " -> FAIL") + "\n";
    }
    void note(const std::string& line) { result_.detail += line + "\n"; }

    /// File name only, so provenance does not depend on the output directory.
    std::string file_name(const std::string& stem) const {
        char prefix[32];
        std::snprintf(prefix, sizeof(prefix), "criterion%02d_", result_.id);
        return prefix + stem + ".csv";
    }

    void write(const std::string& stem, const json& provenance, const std::vector<ResultRow>& rows) {
        const auto path = (std::filesystem::path(opt_.out_dir) / file_name(stem)).string();
        json p = provenance;
        p["criterion"] = result_.id;
        p["budget"] = to_string(opt_.budget);
        p["seed"] = opt_.seed;
        write_results_csv(path, p, rows);
        result_.files.push_back(path);
    }

    ExperimentOutcome experiment(const std::string& stem, ExperimentSpec spec) {
        spec.seed = opt_.seed;
        spec.output = file_name(stem);
        auto outcome = execute_experiment(spec);
        write(stem, spec.to_json(), outcome.rows);
        std::istringstream lines(outcome.report);
        for (std::string l; std::getline(lines, l);) note("  " + stem + ": " + l);
        result_.passed = result_.passed && outcome.passed;
        return outcome;
    }

    ResultRow row(const std::string& id, const std::string& model, std::size_t n, std::size_t m, double p,
                  double est, double se, json extra = json::object()) const {
        ResultRow r;
        r.experiment_id = id;
        r.model_id = model;
        r.n = n;
        r.m = m;
        r.p = p;
        r.estimate = est;
        r.std_error = se;
        r.extra = std::move(extra);
        r.seed = opt_.seed;
        return r;
    }

    const VerifyOptions& opt() const { return opt_; }
    const Sizes& sz() const { return sz_; }
    CriterionResult& result() { return result_; }

private:
    const VerifyOptions& opt_;
    const Sizes& sz_;
    CriterionResult result_;
};

std::string fmt(double v, int digits = 5) {
    std::ostringstream o;
    o.precision(digits);
    o << v;
    return o.str();
}

ExperimentSpec base_spec(ExperimentKind kind, const std::string& model) {
    json j{{"kind", to_string(kind)}, {"model", model}, {"output", "unused.csv"}};
    if (kind == ExperimentKind::FinalTimeRate || kind == ExperimentKind::GlobalL1Rate ||
        kind == ExperimentKind::RecursionCheck || kind == ExperimentKind::OccupationCheck ||
        kind == ExperimentKind::OracleIdentity) {
        j["n"] = {1, 2, 4};
    }
    return parse_experiment_spec(j);
}

std::shared_ptr<const TransformG> transform_for(const SdeModel& model) {
    return std::make_shared<const TransformG>(build_jump_removal_transform(model));
}

// ---------------------------------------------------------------- criteria

void final_time_rate(Criterion& c) {
    auto spec = base_spec(ExperimentKind::FinalTimeRate, "indicator-drift");
    spec.n = c.sz().rate_grid;
    spec.replications = c.sz().replications;
    spec.m = c.sz().m;
    spec.m_check = c.sz().m_check;
    c.experiment("final_time_rate", spec);
}

void global_rate(Criterion& c) {
    for (const std::string model : {"ou", "indicator-drift"}) {
        auto spec = base_spec(ExperimentKind::GlobalL1Rate, model);
        spec.n = c.sz().rate_grid;
        spec.replications = c.sz().replications;
        spec.m = c.sz().m;
        c.experiment("global_l1_rate_" + model, spec);
    }
}

/// Outputs the zero path after reading W(T) once.
class ZeroPath final : public AdaptiveMethod {
public:
    explicit ZeroPath(double horizon) : horizon_(horizon) {}
    std::string name() const override { return "zero-path"; }
    double next_time(const ObservedData&) const override { return horizon_; }
    bool should_stop(const ObservedData& data) const override { return data.size() >= 1; }
    OutputPath output(const ObservedData&) const override { return {{0.0}, {0.0}}; }

private:
    double horizon_;
};

void closed_forms(Criterion& c) {
    auto bridge = base_spec(ExperimentKind::BridgeMoments, "brownian");
    bridge.replications = c.sz().replications;
    bridge.m = c.sz().bridge_m;
    c.experiment("bridge_moments", bridge);

    std::vector<ResultRow> rows;
    const auto ou = find_model("ou").model();
    auto cfg = CouplingExperimentConfig::uniform(ou, 1);
    cfg.m = c.sz().bridge_m;
    cfg.replications = c.sz().replications;
    cfg.seed = c.opt().seed;
    const auto d = global_coupling_distance(cfg);
    const double exact = ou_single_interval_distance2(ou.horizon);
    c.check(std::abs(d.mean_power - exact) <= 3.0 * d.mean_power_se,
            "OU one-interval E|X_T - Xtilde_T|^2 = " + fmt(d.mean_power) + " +/- " + fmt(d.mean_power_se, 3) +
                ", closed form " + fmt(exact) + " (3 SE)");
    rows.push_back(c.row("ou-single-interval", "ou", 1, cfg.m, 2.0, d.mean_power, d.mean_power_se,
                         {{"closed_form", exact}}));

    const auto bm = find_model("brownian").model();
    auto zcfg = CouplingExperimentConfig::uniform(bm, 1);
    zcfg.m = 1024;
    zcfg.replications = c.sz().replications;
    zcfg.seed = c.opt().seed;
    const auto z = global_l1_error(ZeroPath(bm.horizon), zcfg);
    const double zexact = 2.0 / 3.0 * std::sqrt(2.0 / std::numbers::pi);
    c.check(std::abs(z.estimate - zexact) <= 3.0 * z.std_error,
            "zero-path L1 error vs Brownian motion = " + fmt(z.estimate) + " +/- " + fmt(z.std_error, 3) +
                ", closed form " + fmt(zexact) + " (3 SE)");
    rows.push_back(c.row("zero-path-l1", "brownian", 1, zcfg.m, 1.0, z.estimate, z.std_error,
                         {{"closed_form", zexact}}));
    c.write("closed_forms", json{{"suite", "closed-form oracles"}}, rows);
}

void oracle_identity(Criterion& c) {
    const std::pair<const char*, std::vector<std::size_t>> cases[] = {{"ou", {1, 4}},
                                                                       {"indicator-drift", {8, 32}}};
    for (const auto& [model, grid] : cases) {
        auto spec = base_spec(ExperimentKind::OracleIdentity, model);
        spec.n = grid;
        spec.replications = c.sz().replications;
        spec.m = c.sz().m;
        spec.inner = c.sz().inner;
        c.experiment(std::string("oracle_identity_") + model, spec);
    }
}

void method_lower_bound(Criterion& c) {
    const auto model = find_model("indicator-drift").model();
    const auto g = transform_for(model);
    const std::size_t n = 32;
    auto cfg = CouplingExperimentConfig::uniform(model, n, g);
    cfg.m = c.sz().m;
    cfg.replications = c.sz().small_replications;
    cfg.seed = c.opt().seed;
    const auto dist = global_coupling_distance(cfg);
    c.note("coupling distance (E|X_1 - Xtilde_1|^2)^(1/2) = " + fmt(dist.estimate) + " +/- " +
           fmt(dist.std_error, 3));
    std::vector<ResultRow> rows;
    rows.push_back(c.row("coupling-distance", model.name, n, cfg.m, 2.0, dist.estimate, dist.std_error));

    const auto registry = MethodRegistry::builtin();
    MethodParameters params{model, g, n, cfg.m, c.sz().method_inner, c.opt().seed};
    for (const auto& name : registry.names()) {
        const auto method = registry.create(name, params);
        const auto err = final_time_rms_error(*method, cfg);
        const double bound = 0.5 * dist.estimate;
        const double se = std::hypot(err.std_error, 0.5 * dist.std_error);
        c.check(err.estimate >= bound - 3.0 * se, name + ": RMS error " + fmt(err.estimate) + " +/- " +
                                                      fmt(err.std_error, 3) + " vs half distance " +
                                                      fmt(bound) + " (3 combined SE " + fmt(3.0 * se, 3) + ")");
        rows.push_back(c.row(name, model.name, n, cfg.m, 2.0, err.estimate, err.std_error,
                             {{"half_distance", bound}, {"combined_se", se}}));
    }
    c.write("method_lower_bound", json{{"suite", "adaptive methods vs half coupling distance"}}, rows);
}

void recursion(Criterion& c) {
    for (const std::string model : {"ou", "indicator-drift"}) {
        auto spec = base_spec(ExperimentKind::RecursionCheck, model);
        spec.n = c.opt().budget == Budget::Full ? std::vector<std::size_t>{8, 16, 32, 64}
                                                : std::vector<std::size_t>{8, 16};
        spec.replications = c.sz().replications;
        spec.m = c.sz().m;
        spec.bootstrap = c.sz().bootstrap;
        c.experiment("recursion_" + model, spec);
    }
}

void occupation(Criterion& c) {
    auto spec = base_spec(ExperimentKind::OccupationCheck, "indicator-drift");
    spec.n = {16, 32};
    spec.replications = c.sz().replications;
    spec.m = c.sz().m;
    spec.bootstrap = c.sz().bootstrap;
    c.experiment("occupation", spec);
}

void transform_suite(Criterion& c) {
    std::vector<ResultRow> rows;
    const double xi = 0.0;
    for (const std::string name : {"indicator-drift", "affine-diffusion-jump"}) {
        const auto model = find_model(name).model();
        const auto g = transform_for(model);
        const auto tm = transformed_coefficients(g, model);
        const double y = g->value(xi);
        const double jump = std::abs(tm.drift->value(y, Side::Right) - tm.drift->value(y, Side::Left));
        const double orig = std::abs(model.drift->value(xi, Side::Right) - model.drift->value(xi, Side::Left));
        c.check(jump <= 1e-8 && std::abs(orig - 1.0) <= 1e-12,
                name + ": transformed drift jump " + fmt(jump, 3) + " (drift jump " + fmt(orig) + ")");
        rows.push_back(c.row("jump-removal", name, 0, 0, 0.0, jump, 0.0, {{"original_jump", orig}}));

        double worst = 0.0;
        for (int k = 0; k <= 4000; ++k) {
            const double x = -4.0 + 8.0 * k / 4000.0;
            worst = std::max(worst, std::abs(g->inverse(g->value(x)) - x));
        }
        c.check(worst <= 1e-9, name + ": G round trip on [-4, 4] max error " + fmt(worst, 3));
        rows.push_back(c.row("round-trip-G", name, 4001, 0, 0.0, worst, 0.0));

        const auto drift = [&](double v) { return tm.drift->value(v); };
        const auto diff = [&](double v) { return tm.diffusion->value(v); };
        const double l1 = lipschitz_certificate(drift, -1.0, 1.0, 10000);
        const double l2 = lipschitz_certificate(drift, -1.0, 1.0, 20000);
        const double s1 = lipschitz_certificate(diff, -1.0, 1.0, 10000);
        const double s2 = lipschitz_certificate(diff, -1.0, 1.0, 20000);
        const auto stable = [](double u, double v) {
            return std::isfinite(u) && std::isfinite(v) && std::max(u, v) < 2.0 * std::min(u, v) + 1e-12;
        };
        c.check(stable(l1, l2) && stable(s1, s2),
                name + ": Lipschitz certificates on [-1, 1] drift " + fmt(l1) + " / " + fmt(l2) +
                    ", diffusion " + fmt(s1) + " / " + fmt(s2) + " at 1e4 / 2e4 points (< 2x change)");
        const auto gv = [&](double v) { return g->value(v); };
        const double lg = lipschitz_certificate(gv, -4.0, 4.0, 10000);
        c.check(g->min_slope() > 0.0 && std::isfinite(lg),
                name + ": G bi-Lipschitz, g_min " + fmt(g->min_slope()) + ", Lip(G) on [-4, 4] " + fmt(lg));
        rows.push_back(c.row("lipschitz-drift", name, 20000, 0, 0.0, l2, 0.0, {{"coarse_grid", l1}}));
        rows.push_back(c.row("g-min", name, 0, 0, 0.0, g->min_slope(), 0.0, {{"lipschitz_G", lg}}));
        rows.push_back(c.row("lipschitz-diffusion", name, 20000, 0, 0.0, s2, 0.0, {{"coarse_grid", s1}}));
    }

    const auto affine = find_model("affine-diffusion-jump").model();
    const double delta = 0.5;
    const auto h = lamperti_transform(affine, xi, delta);
    double worst = 0.0, round = 0.0;
    const double ya = h.value(xi - delta), yb = h.value(xi + delta);
    for (int k = 0; k <= 1000; ++k) {
        const double x = h.inverse(ya + (yb - ya) * k / 1000.0);
        worst = std::max(worst, std::abs(h.slope(x) * h.continuation(x) - 1.0));
    }
    for (int k = 0; k <= 4000; ++k) {
        const double x = -4.0 + 8.0 * k / 4000.0;
        round = std::max(round, std::abs(h.inverse(h.value(x)) - x));
    }
    c.check(worst <= 1e-8, "affine-diffusion-jump: |(H' sigma*) o H^-1 - 1| on a 1001-point grid over H(window), max " + fmt(worst, 3));
    c.check(round <= 1e-9, "affine-diffusion-jump: H round trip on [-4, 4] max error " + fmt(round, 3));
    rows.push_back(c.row("lamperti-normalization", affine.name, 1001, 0, 0.0, worst, 0.0, {{"delta", delta}}));
    rows.push_back(c.row("round-trip-H", affine.name, 4001, 0, 0.0, round, 0.0));
    c.write("transforms", json{{"suite", "transform checks"}}, rows);
}

void localization(Criterion& c) {
    auto spec = base_spec(ExperimentKind::LocalizationCheck, "indicator-drift");
    spec.replications = c.sz().localization_paths;
    spec.steps = c.sz().steps;
    c.experiment("localization", spec);
}

void density(Criterion& c) {
    auto spec = base_spec(ExperimentKind::DensityGate, "indicator-drift");
    spec.replications = c.sz().replications;
    spec.steps = c.sz().steps;
    spec.bootstrap = c.sz().bootstrap;
    c.experiment("density_indicator", spec);

    auto gauss = base_spec(ExperimentKind::DensityGate, "brownian");
    gauss.replications = c.sz().replications;
    gauss.steps = c.sz().steps;
    gauss.bootstrap = c.sz().bootstrap;
    gauss.expected = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    gauss.tolerance = 0.02;
    c.experiment("density_gaussian", gauss);
}

void adaptive_harness(Criterion& c) {
    std::vector<ResultRow> rows;
    const auto model = find_model("indicator-drift").model();
    const auto g = transform_for(model);
    const auto registry = MethodRegistry::builtin();
    const std::size_t n = 32;
    MethodParameters params{model, g, n, c.sz().m, c.sz().method_inner, c.opt().seed};
    const auto euler = registry.create("uniform-euler", params);

    const auto cost = mean_cost(*euler, model, c.sz().small_replications, c.opt().seed);
    c.check(cost.mean == static_cast<double>(n) && cost.max == n,
            "uniform-euler cost: mean " + fmt(cost.mean) + ", max " + std::to_string(cost.max) + " (n = 32)");
    rows.push_back(c.row("cost", model.name, n, 0, 0.0, cost.mean, cost.std_error,
                         {{"max", cost.max}}));

    auto cfg = CouplingExperimentConfig::uniform(model, n, g);
    cfg.m = c.sz().m;
    cfg.replications = c.sz().small_replications;
    cfg.seed = c.opt().seed;
    const auto adaptive = global_l1_error(*euler, cfg);
    const auto direct = fixed_grid_euler_l1_error(cfg, n);
    const double gap = std::abs(adaptive.estimate - direct.estimate);
    c.check(gap <= 1e-12, "nonadaptive embedding: adaptive interface " + fmt(adaptive.estimate, 17) +
                              ", direct grid " + fmt(direct.estimate, 17) + ", difference " + fmt(gap, 3));
    rows.push_back(c.row("embedding", model.name, n, cfg.m, 1.0, gap, 0.0,
                         {{"adaptive", adaptive.estimate}, {"direct", direct.estimate}}));

    // Query consistency: re-reading any time, in any order, returns the same value.
    const std::size_t paths = std::min<std::size_t>(c.sz().small_replications, 500);
    std::vector<double> mismatches(paths, 0.0);
    for_each_replication(c.opt().seed, paths, [&](std::size_t r) {
        const StreamFamily family{c.opt().seed, r};
        RngStream driver = family.stream(Purpose::Driver);
        LatticeAccess access(sample_brownian_lattice(driver, {0.0, model.horizon}),
                             family.stream(Purpose::Refinement));
        RngStream pick = family.stream(Purpose::Auxiliary);
        std::vector<double> times(64), first(64);
        for (std::size_t k = 0; k < times.size(); ++k) {
            times[k] = model.horizon * pick.uniform();
            first[k] = access.query(times[k]);
        }
        double bad = 0.0;
        for (std::size_t k = times.size(); k-- > 0;) {
            if (access.query(times[k]) != first[k]) bad += 1.0;
        }
        if (access.query(0.0) != 0.0) bad += 1.0;
        mismatches[r] = bad;
    });
    const double bad = pairwise_sum(mismatches);
    c.check(bad == 0.0, "query consistency: " + fmt(bad) + " mismatches over " + std::to_string(paths) +
                            " paths x 64 repeated queries");
    rows.push_back(c.row("query-consistency", model.name, 64, 0, 0.0, bad, 0.0, {{"paths", paths}}));

    // Euler through the adaptive interface on the Lipschitz baseline.
    const auto ou = find_model("ou").model();
    const auto ou_g = transform_for(ou);
    MethodParameters ou_params{ou, ou_g, n, c.sz().m, c.sz().method_inner, c.opt().seed};
    std::vector<RatePoint> points;
    for (std::size_t k : c.sz().rate_grid) {
        auto kcfg = CouplingExperimentConfig::uniform(ou, k, ou_g);
        kcfg.m = c.sz().m;
        kcfg.replications = c.sz().small_replications;
        kcfg.seed = mix64(c.opt().seed, k);
        ou_params.n = k;
        const auto method = registry.create("uniform-euler", ou_params);
        const auto e = global_l1_error(*method, kcfg);
        points.push_back({static_cast<double>(k), e.estimate, e.std_error});
        rows.push_back(c.row("euler-adaptive-l1", ou.name, k, kcfg.m, 1.0, e.estimate, e.std_error));
    }
    try {
        const auto fit = fit_rate(points);
        c.check(fit.slope >= -0.6 && fit.slope <= -0.4,
                "uniform-euler L1 slope on ou " + fmt(fit.slope, 4) + " +/- " + fmt(fit.slope_ci_half_width, 3) +
                    " over " + std::to_string(fit.count) + " grid sizes, target [-0.6, -0.4]");
    } catch (const Error& e) {
        c.check(false, std::string("uniform-euler L1 slope: ") + e.what());
    }
    c.write("adaptive_harness", json{{"suite", "adaptive harness"}}, rows);
}

struct Entry {
    int id;
    const char* title;
    std::function<void(Criterion&)> run;
};

const std::vector<Entry>& entries() {
    static const std::vector<Entry> list{
        {1, "final-time rate", final_time_rate},
        {2, "global L1 rate", global_rate},
        {3, "closed-form oracles", closed_forms},
        {4, "conditional-variance identity", oracle_identity},
        {5, "methods vs half coupling distance", method_lower_bound},
        {6, "recursion and local-global equivalence", recursion},
        {7, "occupation-time bound", occupation},
        {8, "transform suite", transform_suite},
        {9, "localization coincidence", localization},
        {10, "density gate", density},
        {11, "adaptive harness", adaptive_harness},
    };
    return list;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const VerifyOptions& options, std::ostream& log) {
    for (int id : options.only) {
        if (id < 1 || id > 11) throw UsageError("no acceptance criterion " + std::to_string(id));
    }
    std::filesystem::create_directories(options.out_dir);
    const Sizes sz = sizes_for(options.budget);
    std::vector<CriterionResult> results;
    for (const auto& e : entries()) {
        if (!options.only.empty() &&
            std::find(options.only.begin(), options.only.end(), e.id) == options.only.end()) {
            continue;
        }
        Criterion c(e.id, e.title, options, sz);
        const auto start = std::chrono::steady_clock::now();
        try {
            e.run(c);
        } catch (const std::exception& ex) {
            c.check(false, std::string("error: ") + ex.what());
        }
        c.result().seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const auto& r = c.result();
        log << (r.passed ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.title << ", "
            << fmt(r.seconds, 3) << " s)\n"
            << r.detail << std::flush;
        results.push_back(r);
    }
    return results;
}

}  // namespace sdelab
