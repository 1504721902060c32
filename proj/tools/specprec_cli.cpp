// specprec: run the synthetic experiments and the oracle self-checks.
//
//   specprec run --config fig1.cfg [--out trace.csv]
//   specprec sweep --config fig1.cfg --k 30,40,50 [--out sweep.csv]
//   specprec spectrum --config fig2.cfg --out spectrum.csv
//   specprec verify [--seed N]

#include "specprec/harness.hpp"
#include "specprec/verify.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace specprec;

void write_rows(const std::vector<TraceRow>& rows, const std::string& path) {
    if (path.empty() || path == "-") {
        write_csv(rows, std::cout);
    } else {
        emit_csv(rows, path);
    }
}

// Solver trouble is reported but does not change the exit code: the rows that
// were produced are still valid.
void report(const ExperimentResult& result, Index k) {
    for (const auto& o : result.outcomes) {
        if (!o.diagnostic.empty()) std::cerr << "warning: k=" << k << " " << to_string(o.method) << ": " << o.diagnostic << '\n';
    }
}

int cmd_run(const std::string& config_path, const std::string& out) {
    const ExperimentConfig cfg = load_config(config_path);
    const ExperimentResult result = run_experiment_detailed(cfg);
    report(result, cfg.k);
    write_rows(result.rows, out.empty() ? cfg.output_path : out);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<Index>& ks, const std::string& out) {
    ExperimentConfig cfg = load_config(config_path);
    std::vector<TraceRow> rows;
    for (Index k : ks) {
        cfg.k = k;
        const ExperimentResult result = run_experiment_detailed(cfg);
        report(result, k);
        rows.insert(rows.end(), result.rows.begin(), result.rows.end());
    }
    write_rows(rows, out.empty() ? cfg.output_path : out);
    return 0;
}

int cmd_spectrum(const std::string& config_path, const std::string& out) {
    const ExperimentConfig cfg = load_config(config_path);
    if (out == "-") {
        write_spectrum_csv(cfg, std::cout);
        return 0;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + out + " for writing");
    write_spectrum_csv(cfg, f);
    return 0;
}

int cmd_verify(std::uint64_t seed) {
    int failed = 0;
    for (const auto& r : verify::run_all(seed)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
        if (!r.passed) ++failed;
    }
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scaled spectral preconditioners for CG: experiment runner"};
    app.require_subcommand(1);

    std::string config, out;
    std::vector<Index> ks;
    std::uint64_t seed = 20240601;

    auto* run = app.add_subcommand("run", "run the methods of one config and write the trace CSV");
    run->add_option("--config", config, "experiment config")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "CSV path ('-' for stdout); defaults to the config's output key");

    auto* sweep = app.add_subcommand("sweep", "run one config for several k and concatenate the traces");
    sweep->add_option("--config", config, "experiment config")->required()->check(CLI::ExistingFile);
    sweep->add_option("--k", ks, "comma-separated k values")->required()->delimiter(',');
    sweep->add_option("--out", out, "CSV path ('-' for stdout); defaults to the config's output key");

    auto* spectrum = app.add_subcommand("spectrum", "dump eigenvalues, zeta and logit abscissa");
    spectrum->add_option("--config", config, "experiment config")->required()->check(CLI::ExistingFile);
    spectrum->add_option("--out", out, "CSV path ('-' for stdout)")->required();

    auto* verify = app.add_subcommand("verify", "oracle-based self checks at small n");
    verify->add_option("--seed", seed, "RNG seed for the random instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config, out);
        if (*sweep) return cmd_sweep(config, ks, out);
        if (*spectrum) return cmd_spectrum(config, out);
        if (*verify) return cmd_verify(seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
