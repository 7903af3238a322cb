#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sdelab {

enum class Budget { Full, Smoke };

std::string to_string(Budget budget);
Budget budget_from_string(const std::string& name);

struct VerifyOptions {
    std::string out_dir = "sdelab-verify";
    std::uint64_t seed = 1;
    Budget budget = Budget::Full;
    std::vector<int> only;  // empty: every criterion
};

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    std::string detail;               // one verdict line per sub-check
    std::vector<std::string> files;   // CSVs written
    double seconds = 0.0;
};

/// Ids of the criteria run_acceptance knows about (1 to 11).
std::vector<int> acceptance_ids();

/**
 * Runs the acceptance suites and writes one CSV per suite into out_dir.
 * Progress lines go to `log` as each criterion finishes.
 */
std::vector<CriterionResult> run_acceptance(const VerifyOptions& options, std::ostream& log);

/// 2 (int_0^T f^2 - (int_0^T f)^2 / T) with f(s) = exp(-(T - s)): the squared
/// final-time distance of OU under one resampled bridge on [0, T].
double ou_single_interval_distance2(double horizon);

}  // namespace sdelab
