// meanforce: command-line driver for the benchmark tables.
//
// Exit codes: 0 success, 2 invalid input or failed deterministic check,
// 3 failed statistical check, 1 numerical failure.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "meanforce/config.hpp"
#include "meanforce/experiments.hpp"

namespace {

using namespace meanforce;

constexpr int kExitContract = 2;
constexpr int kExitStatistical = 3;
constexpr int kExitNumerical = 1;

struct Flags {
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> values; // config key -> raw value
    std::vector<std::pair<std::string, CLI::Option*>> options;
    bool counterterm = false;
    bool cutoff_interval = false;
    bool no_antithetic = false;
    std::vector<double> betas = kDefaultBetas;
    std::vector<double> gs = kDefaultGs;
    std::vector<double> g2s = kDefaultG2s;
};

void add_value(CLI::App& app, Flags& f, const std::string& flag, const std::string& key,
               const std::string& help) {
    f.options.emplace_back(key, app.add_option(flag, f.values[key], help));
}

RunConfig resolve(Flags& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) apply_config_file(cfg, f.config_path);
    for (const auto& [key, opt] : f.options)
        if (opt->count() > 0) apply_setting(cfg, key, f.values[key]);
    for (const auto& s : f.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ContractViolation("--set expects key=value, got " + s);
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (f.counterterm) cfg.counterterm = true;
    if (f.cutoff_interval) cfg.bath.cutoff_interval = true;
    if (f.no_antithetic) cfg.mc.antithetic = false;
    validate(cfg);
    return cfg;
}

void emit(const ExperimentResult& r, const RunConfig& cfg) {
    if (cfg.output.path.empty()) {
        write_result(std::cout, r, cfg.output.format);
        return;
    }
    std::ofstream out(cfg.output.path);
    if (!out) throw ContractViolation("cannot open output file " + cfg.output.path);
    write_result(out, r, cfg.output.format);
    if (!out) throw NumericalError("failed writing " + cfg.output.path);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic Hamiltonian-of-mean-force benchmarks"};
    app.require_subcommand(1);
    Flags f;

    app.add_option("--config", f.config_path, "TOML-style configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", f.sets, "Override any config key, e.g. --set bath.modes=400");
    add_value(app, f, "--system.energies", "system.energies", "Level energies, e.g. [0,0.35,0.9]");
    add_value(app, f, "--system.coupled-level", "system.coupled_level", "Level coupled to the bath");
    add_value(app, f, "--bath.g", "bath.g", "Coupling strength g");
    add_value(app, f, "--bath.omega-c", "bath.omega_c", "Cutoff frequency");
    add_value(app, f, "--bath.modes", "bath.modes", "Number of discrete modes K");
    add_value(app, f, "--bath.omega-max", "bath.omega_max", "Upper discretization frequency");
    app.add_flag("--bath.cutoff-interval", f.cutoff_interval, "Discretize on (0, omega_c]");
    add_value(app, f, "--grid.beta", "grid.beta", "Inverse temperature");
    add_value(app, f, "--grid.slices", "grid.slices", "Imaginary-time slices N");
    add_value(app, f, "--mc.samples", "mc.samples", "Independent noise draws per point");
    add_value(app, f, "--mc.seed", "mc.seed", "Base random seed");
    app.add_flag("--no-antithetic", f.no_antithetic, "Disable antithetic pairing");
    add_value(app, f, "--ed.n-max", "ed.n_max", "Fock truncation per mode");
    add_value(app, f, "--ed.modes-used", "ed.modes_used", "Modes kept for exact diagonalization");
    app.add_flag("--counterterm", f.counterterm, "Add +lambda_disc f^2 to H_Q");
    add_value(app, f, "--out", "output.path", "Output file (default stdout)");
    add_value(app, f, "--format", "output.format", "csv or json");

    auto* lambda = app.add_subcommand("lambda", "Print lambda_cont and lambda_disc");
    auto* kernel = app.add_subcommand("kernel", "Tabulate K(tau) on the grid");
    auto* sample = app.add_subcommand("sample", "Noise-path statistics against the kernel");
    auto* fig1 = app.add_subcommand("fig1", "Var(X) against 2 beta lambda over (beta, g)");
    auto* fig2 = app.add_subcommand("fig2", "Coupled-level population and lambda_est over (beta, g)");
    auto* fig3 = app.add_subcommand("fig3", "Operator-basis fit of H_MF over g^2 at grid.beta");
    auto* fig4 = app.add_subcommand("fig4", "Per-level shifts at grid.beta and bath.g");
    auto* check = app.add_subcommand("validate", "Run the invariant suite");
    for (auto* sub : {fig1, fig2}) {
        sub->add_option("--betas", f.betas, "Inverse temperatures")->delimiter(',');
        sub->add_option("--gs", f.gs, "Coupling strengths")->delimiter(',');
    }
    fig3->add_option("--g2s", f.g2s, "Values of g^2")->delimiter(',');
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitContract;
    }

    try {
        const RunConfig cfg = resolve(f);
        if (*lambda) emit(run_lambda(cfg), cfg);
        else if (*kernel) emit(run_kernel(cfg), cfg);
        else if (*sample) emit(run_sample(cfg), cfg);
        else if (*fig1) emit(run_fig1(cfg, f.betas, f.gs), cfg);
        else if (*fig2) emit(run_fig2(cfg, f.betas, f.gs), cfg);
        else if (*fig3) emit(run_fig3(cfg, f.g2s, cfg.grid.beta), cfg);
        else if (*fig4) emit(run_fig4(cfg, cfg.grid.beta, cfg.bath.g), cfg);
        else if (*check) {
            const ValidationReport rep = run_validate(cfg);
            emit(rep.result, cfg);
            if (!rep.deterministic_ok) {
                std::cerr << "validate: deterministic check failed\n";
                return kExitContract;
            }
            if (!rep.statistical_ok) {
                std::cerr << "validate: statistical check failed\n";
                return kExitStatistical;
            }
        }
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitContract;
    } catch (const StatisticalConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStatistical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return 0;
}
