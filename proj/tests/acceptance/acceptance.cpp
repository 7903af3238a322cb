// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
//
//   acceptance [--out DIR] [--budget full|smoke] [--seed S] [--only 1,2,...]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sdelab/verify.hpp"

namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> csv_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[e.path().filename().string()] = ss.str();
    }
    return out;
}

int run_verify(const std::string& threads, const fs::path& dir, std::uint64_t seed) {
    fs::remove_all(dir);
    const std::string cmd = "SDELAB_THREADS=" + threads + " " + SDELAB_EXE + " verify --budget smoke --seed " +
                            std::to_string(seed) + " --out " + dir.string() + " > " +
                            (dir.string() + ".log") + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Two smoke runs of the whole verify suite at different worker counts must write identical bytes.
sdelab::CriterionResult reproducibility(const fs::path& out, std::uint64_t seed) {
    sdelab::CriterionResult r{12, "bitwise reproducibility across worker counts", false, "", {}, 0.0};
    const auto a_dir = out / "criterion12_threads1";
    const auto b_dir = out / "criterion12_threads8";
    const int a_code = run_verify("1", a_dir, seed);
    const int b_code = run_verify("8", b_dir, seed);
    const auto a = csv_files(a_dir);
    const auto b = csv_files(b_dir);
    std::ostringstream d;
    d << "verify exit codes " << a_code << " and " << b_code << "; " << a.size() << " and " << b.size()
      << " CSV files\n";
    bool same = !a.empty() && a.size() == b.size();
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        const bool eq = it != b.end() && it->second == bytes;
        if (!eq) d << "  differs: " << name << '\n';
        same = same && eq;
    }
    d << (same ? "all files byte-identical" : "byte comparison failed") << '\n';
    r.passed = same && (a_code == 0 || a_code == 1) && a_code == b_code;
    r.detail = d.str();
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sdelab acceptance suite"};
    sdelab::VerifyOptions opt;
    opt.out_dir = "acceptance-out";
    std::string budget = "full";
    std::vector<int> only;
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_option("--seed", opt.seed, "master seed");
    app.add_option("--budget", budget, "full or smoke")->check(CLI::IsMember({"full", "smoke"}));
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    opt.budget = sdelab::budget_from_string(budget);

    bool want12 = only.empty();
    for (int id : only) {
        if (id == 12) {
            want12 = true;
        } else {
            opt.only.push_back(id);
        }
    }

    std::vector<sdelab::CriterionResult> results;
    if (only.empty() || !opt.only.empty()) {
        std::ostringstream log;
        results = sdelab::run_acceptance(opt, log);
        std::cerr << log.str();
    }
    if (want12) {
        fs::create_directories(opt.out_dir);
        results.push_back(reproducibility(fs::absolute(opt.out_dir), opt.seed));
        std::cerr << results.back().detail;
    }

    bool all = true;
    for (const auto& r : results) {
        std::printf("%s criterion %d: %s\n", r.passed ? "PASS" : "FAIL", r.id, r.title.c_str());
        all = all && r.passed;
    }
    return all ? 0 : 1;
}
