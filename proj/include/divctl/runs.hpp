#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divctl/config.hpp"
#include "divctl/mc_verify.hpp"
#include "divctl/solver.hpp"

namespace divctl {

struct SolveOutcome {
    Solution solution;
    BarrierReport barriers;
    InvariantReport invariants;
    std::vector<double> probe_values;  ///< one per config probe
    double wall_seconds = 0.0;
};

/// Solves and evaluates diagnostics without touching the disk.
SolveOutcome solve_config(const RunConfig& config);

/// Solves and writes value.csv, summary.json and barrier.csv into `out`.
/// Wall time goes into summary.json only when `record_timing` is set, so that
/// default output is byte-identical across runs.
SolveOutcome run_solve(const RunConfig& config, const std::filesystem::path& out, bool record_timing = false);

/// Rebuilds the stored policy from a directory written by run_solve.
/// Throws MissingPolicy when the files are absent or do not match the config lattice.
Solution read_solution(const RunConfig& config, const std::filesystem::path& dir);

struct ProbeCheck {
    Probe probe;
    double value = 0.0;  ///< V_h at the probe
    McEstimate estimate;
    double gap = 0.0;    ///< |V_h - mean|
    double bound = 0.0;  ///< 3 stderr + 5 h c_max
    bool pass = false;
};

/// Largest dividend weight over x >= 0 and all regimes.
double max_dividend_weight(const PayoffSpec& payoff, std::size_t regimes);

std::vector<ProbeCheck> verify_solution(const RunConfig& config, const Solution& solution);

/// Simulates every probe under the stored policy and writes verify.json.
std::vector<ProbeCheck> run_verify(const RunConfig& config, const std::filesystem::path& solution_dir,
                                   const std::filesystem::path& out);

struct SweepRow {
    double h = 0.0;
    Probe probe;
    double value = 0.0;
    std::optional<double> diff;   ///< |V_h - V_prev| against the previous (coarser) h
    std::optional<double> ratio;  ///< previous diff / this diff
    std::optional<double> order;  ///< log2(ratio)
    bool converged = false;
};

std::vector<SweepRow> sweep(const RunConfig& config, std::span<const double> steps);

/// Solves at each h in order and writes sweep.csv.
std::vector<SweepRow> run_sweep(const RunConfig& config, std::span<const double> steps,
                                const std::filesystem::path& out);

/// b* and a table of barrier-strategy values for the single-regime oracle.
std::string oracle_report(double mu, double sigma2, double r);

}  // namespace divctl
