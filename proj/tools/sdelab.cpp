#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sdelab/catalog.hpp"
#include "sdelab/errors.hpp"
#include "sdelab/experiment.hpp"
#include "sdelab/parallel.hpp"
#include "sdelab/verify.hpp"

namespace {

constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

void print_models(bool as_json) {
    using nlohmann::json;
    if (as_json) {
        json out = json::array();
        for (const auto& e : sdelab::builtin_models()) {
            auto j = sdelab::entry_to_json(e);
            j["description"] = e.description;
            j["role"] = e.role;
            j["criteria"] = e.criteria;
            out.push_back(j);
        }
        std::cout << out.dump(2) << '\n';
        return;
    }
    for (const auto& e : sdelab::builtin_models()) {
        std::cout << e.name << "\n  " << e.description << "\n  role: " << e.role << "\n  criteria:";
        for (int c : e.criteria) std::cout << ' ' << c;
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo lab for lower error bounds of SDE approximation with discontinuous drift"};
    app.set_version_flag("--version", sdelab::version_string());
    app.require_subcommand(1);

    std::string spec_path;
    auto* run = app.add_subcommand("run", "Run one experiment spec and write its CSV and report");
    run->add_option("spec", spec_path, "Experiment spec (JSON)")->required();

    bool as_json = false;
    auto* models = app.add_subcommand("models", "List the built-in models");
    models->add_flag("--json", as_json, "Print the catalog in the JSON model format");

    sdelab::VerifyOptions vopt;
    std::string budget = "full";
    auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
    verify->add_option("--out", vopt.out_dir, "Directory for the CSVs")->capture_default_str();
    verify->add_option("--seed", vopt.seed, "Master seed")->capture_default_str();
    verify->add_option("--budget", budget, "full or smoke")
        ->check(CLI::IsMember({"full", "smoke"}))
        ->capture_default_str();
    verify->add_option("--only", vopt.only, "Criterion ids to run (default: all)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (*run) return sdelab::run_experiment(spec_path, std::cout);
        if (*models) {
            print_models(as_json);
            return 0;
        }
        vopt.budget = sdelab::budget_from_string(budget);
        std::cout << sdelab::version_string() << ", " << sdelab::worker_count() << " worker(s), budget "
                  << budget << ", seed " << vopt.seed << '\n';
        const auto results = sdelab::run_acceptance(vopt, std::cout);
        bool all = true;
        for (const auto& r : results) all = all && r.passed;
        std::cout << (all ? "all criteria passed" : "some criteria FAILED") << '\n';
        return all ? 0 : kFail;
    } catch (const sdelab::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const sdelab::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}
