#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sdelab/catalog.hpp"
#include "sdelab/noise.hpp"

namespace sdelab {

enum class ExperimentKind {
    FinalTimeRate,
    GlobalL1Rate,
    RecursionCheck,
    OccupationCheck,
    OracleIdentity,
    BridgeMoments,
    LocalizationCheck,
    DensityGate,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

/// A fully resolved experiment: every optional field carries its default.
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::FinalTimeRate;
    CatalogEntry model;
    std::vector<std::size_t> n;
    std::size_t m = 64;
    std::optional<std::size_t> m_check;  // second fine resolution for the bias check
    std::size_t replications = 10000;
    double p = 2.0;
    std::uint64_t seed = 1;
    std::string output;
    CouplingKind coupling = CouplingKind::IndependentResample;
    std::size_t inner = 64;
    std::size_t bootstrap = 1000;
    std::size_t steps = 1024;
    double xi = 0.0;
    double t_star = 1.0;
    std::pair<double, double> target{0.0, 0.0};  // slope band, ratio band, ...
    double tolerance = 0.0;                      // kind-specific
    std::optional<double> expected;              // density-gate reference value

    nlohmann::json to_json() const;
};

/**
 * Validates every field before anything runs. Relative model file paths
 * resolve against base_dir. UsageError names the offending field.
 */
ExperimentSpec parse_experiment_spec(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentSpec load_experiment_spec(const std::string& path);

struct ResultRow {
    std::string experiment_id;
    std::string model_id;
    std::size_t n = 0;
    std::size_t m = 0;
    double p = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    nlohmann::json extra = nlohmann::json::object();
    std::uint64_t seed = 0;
};

struct ExperimentOutcome {
    std::vector<ResultRow> rows;
    bool passed = false;
    std::string report;  // human-readable verdict lines
};

ExperimentOutcome execute_experiment(const ExperimentSpec& spec);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

/// Provenance lines ("# ...": code version and resolved spec), header, rows.
void write_results_csv(std::ostream& out, const nlohmann::json& provenance,
                       const std::vector<ResultRow>& rows);
void write_results_csv(const std::string& path, const nlohmann::json& provenance,
                       const std::vector<ResultRow>& rows);

/// `output` with its extension replaced by ".report.txt".
std::string report_path(const std::string& output);

/**
 * Parses, executes and writes the CSV and the report (which ends with the
 * reproduction line). Returns 0 on PASS, 1 on FAIL.
 */
int run_experiment(const std::string& spec_path, std::ostream& log);

std::string version_string();

}  // namespace sdelab
