// Command-line front end: solve, verify, sweep, oracle.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "divctl/runs.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kNotConverged = 3;
constexpr int kVerifyFailed = 4;

void print_warnings(const divctl::RunConfig& cfg) {
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal reinsurance and dividend control by Markov chain approximation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, solution_dir;
    bool record_timing = false;
    std::vector<double> steps{0.2, 0.1, 0.05};
    double mu = 0.0, sigma2 = 0.0, rate = 0.0;

    auto* solve = app.add_subcommand("solve", "solve the control problem and write value.csv, summary.json, barrier.csv");
    solve->add_option("--config", config_path, "run configuration (JSON)")->required();
    solve->add_option("--out", out_dir, "output directory")->required();
    solve->add_flag("--record-timing", record_timing, "include wall time in summary.json");

    auto* verify = app.add_subcommand("verify", "Monte Carlo check of a stored policy at the probes");
    verify->add_option("--config", config_path, "run configuration (JSON)")->required();
    verify->add_option("--solution", solution_dir, "directory written by solve")->required();
    verify->add_option("--out", out_dir, "output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "probe values over a sequence of step sizes");
    sweep->add_option("--config", config_path, "run configuration (JSON)")->required();
    sweep->set_help_flag("--help", "print this help message and exit");
    sweep->add_option("--h", steps, "comma-separated step sizes, coarse to fine")->delimiter(',');
    sweep->add_option("--out", out_dir, "output directory")->required();

    auto* oracle = app.add_subcommand("oracle", "optimal barrier for a single-regime diffusion with c = 1");
    oracle->add_option("--mu", mu, "drift")->required();
    oracle->add_option("--sigma2", sigma2, "variance")->required();
    oracle->add_option("--r", rate, "discount rate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*oracle) {
            std::cout << divctl::oracle_report(mu, sigma2, rate);
            return kOk;
        }

        const divctl::RunConfig cfg = divctl::load_config(config_path);
        print_warnings(cfg);

        if (*solve) {
            const auto o = divctl::run_solve(cfg, out_dir, record_timing);
            for (std::size_t i = 0; i < cfg.probes.size(); ++i)
                std::printf("V(%.6f, %zu) = %.9f\n", cfg.probes[i].x, cfg.probes[i].regime + 1, o.probe_values[i]);
            if (!o.solution.converged) {
                std::cerr << "solver did not converge (final_delta " << o.solution.final_delta << ")\n";
                return kNotConverged;
            }
            return kOk;
        }

        if (*verify) {
            const auto checks = divctl::run_verify(cfg, solution_dir, out_dir);
            bool all = true;
            for (const auto& c : checks) {
                std::printf("(%.6f, %zu): V=%.6f mean=%.6f stderr=%.6f diff=%.6f bound=%.6f %s\n", c.probe.x,
                            c.probe.regime + 1, c.value, c.estimate.mean, c.estimate.std_error, c.gap, c.bound,
                            c.pass ? "pass" : "FAIL");
                all = all && c.pass;
            }
            return all ? kOk : kVerifyFailed;
        }

        if (*sweep) {
            const auto rows = divctl::run_sweep(cfg, steps, out_dir);
            bool converged = true;
            for (const auto& r : rows) {
                std::printf("h=%.4f (%.4f, %zu) V=%.9f", r.h, r.probe.x, r.probe.regime + 1, r.value);
                if (r.diff) std::printf(" diff=%.6f", *r.diff);
                if (r.order) std::printf(" order=%.3f", *r.order);
                std::printf("\n");
                converged = converged && r.converged;
            }
            return converged ? kOk : kNotConverged;
        }
    } catch (const divctl::ConfigError& e) {
        for (const auto& i : e.issues()) std::cerr << "config error: " << i.path << ": " << i.message << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
