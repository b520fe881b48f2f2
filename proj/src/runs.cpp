#include "divctl/runs.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace divctl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fixed9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::InvalidArgument, "write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingPolicy, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string value_csv(const Solution& s) {
    std::string out = "x,regime,V,action,u_star\n";
    out.reserve(s.value.size() * 48);
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        for (std::size_t l = 0; l < s.regimes; ++l) {
            out += fixed9(s.grid.x(k));
            out += ',';
            out += std::to_string(l + 1);
            out += ',';
            out += fixed9(s.V(k, l));
            out += s.action_at(k, l) == Action::Singular ? ",singular," : ",regular,";
            if (!std::isnan(s.u_at(k, l))) out += fixed9(s.u_at(k, l));
            out += '\n';
        }
    }
    return out;
}

std::string barrier_csv(const BarrierReport& b) {
    std::string out = "regime,barrier\n";
    for (std::size_t l = 0; l < b.level.size(); ++l)
        out += std::to_string(l + 1) + "," + (b.level[l] ? fixed9(*b.level[l]) : std::string()) + "\n";
    return out;
}

json summary_json(const RunConfig& cfg, const SolveOutcome& o, bool record_timing) {
    const Solution& s = o.solution;
    json barriers = json::array();
    for (std::size_t l = 0; l < s.regimes; ++l)
        barriers.push_back({{"regime", l + 1},
                            {"barrier", optional_number(o.barriers.level[l])},
                            {"upper_interval", static_cast<bool>(o.barriers.upper_interval[l])}});
    json probes = json::array();
    for (std::size_t i = 0; i < cfg.probes.size(); ++i)
        probes.push_back({{"x", cfg.probes[i].x}, {"regime", cfg.probes[i].regime + 1}, {"V", o.probe_values[i]}});
    const InvariantReport& inv = o.invariants;
    json invariants = {
        {"boundary_zero", inv.boundary_zero},
        {"monotonicity", inv.monotonicity},
        {"gradient", inv.gradient},
        {"singular_gap", inv.singular_gap},
        {"concavity", inv.concavity},
        {"monotone_sweeps", inv.monotone_sweeps},
        {"contraction_ratio", optional_number(inv.contraction_ratio)},
    };
    json out = {
        {"config", to_json(cfg)},
        {"converged", s.converged},
        {"iterations", s.iterations},
        {"final_delta", s.final_delta},
        {"residual", s.residual},
        {"barriers", barriers},
        {"probes", probes},
        {"invariants", invariants},
        {"warnings", cfg.warnings},
    };
    if (record_timing) out["wall_time"] = o.wall_seconds;
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

SolveOutcome solve_config(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    Solution s = solve(config.model, config.grid(), config.method, config.solver);
    SolveOutcome o{std::move(s), {}, {}, {}, 0.0};
    o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.barriers = extract_barrier(o.solution);
    o.invariants = check_invariants(config.model, o.solution);
    for (const Probe& p : config.probes) o.probe_values.push_back(o.solution.value_at(p.x, p.regime));
    return o;
}

SolveOutcome run_solve(const RunConfig& config, const fs::path& out, bool record_timing) {
    SolveOutcome o = solve_config(config);
    fs::create_directories(out);
    write_file(out / "value.csv", value_csv(o.solution));
    write_file(out / "barrier.csv", barrier_csv(o.barriers));
    write_file(out / "summary.json", summary_json(config, o, record_timing).dump(2) + "\n");
    return o;
}

Solution read_solution(const RunConfig& config, const fs::path& dir) {
    const Grid grid = config.grid();
    const std::size_t m = config.model.regimes.count();
    Solution s(grid, m);
    s.controls = config.model.control.mesh();

    std::istringstream in(read_file(dir / "value.csv"));
    std::string line;
    std::getline(in, line);
    if (line != "x,regime,V,action,u_star") throw Error(ErrorCode::MissingPolicy, "value.csv has an unexpected header");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 5 || rows >= s.value.size())
            throw Error(ErrorCode::MissingPolicy, "value.csv does not match the configured lattice");
        const std::size_t k = rows / m, l = rows % m;
        if (grid.nearest(std::stod(cells[0])) != k || std::stoul(cells[1]) != l + 1)
            throw Error(ErrorCode::MissingPolicy, "value.csv does not match the configured lattice");
        s.value[s.index(k, l)] = std::stod(cells[2]);
        s.action[s.index(k, l)] = cells[3] == "singular" ? Action::Singular : Action::Regular;
        s.u_star[s.index(k, l)] = cells[4].empty() ? std::nan("") : std::stod(cells[4]);
        ++rows;
    }
    if (rows != s.value.size()) throw Error(ErrorCode::MissingPolicy, "value.csv does not match the configured lattice");

    const json summary = json::parse(read_file(dir / "summary.json"));
    s.iterations = summary.at("iterations").get<std::size_t>();
    s.converged = summary.at("converged").get<bool>();
    s.final_delta = summary.at("final_delta").get<double>();
    s.residual = summary.at("residual").get<double>();
    s.barrier = extract_barrier(s).level;
    return s;
}

double max_dividend_weight(const PayoffSpec& payoff, std::size_t regimes) {
    double c = 0.0;
    for (std::size_t l = 0; l < regimes; ++l) c = std::max(c, dividend_weight(payoff, 0.0, l));
    return c;
}

std::vector<ProbeCheck> verify_solution(const RunConfig& config, const Solution& solution) {
    const double c_max = max_dividend_weight(config.model.payoff, config.model.regimes.count());
    std::vector<ProbeCheck> out;
    for (const Probe& p : config.probes) {
        ProbeCheck c;
        c.probe = p;
        c.value = solution.value_at(p.x, p.regime);
        c.estimate = simulate_payoff(config.model, solution, config.sim_config(p));
        c.gap = std::abs(c.value - c.estimate.mean);
        c.bound = 3.0 * c.estimate.std_error + 5.0 * config.h * c_max;
        c.pass = c.gap <= c.bound;
        out.push_back(c);
    }
    return out;
}

std::vector<ProbeCheck> run_verify(const RunConfig& config, const fs::path& solution_dir, const fs::path& out) {
    const Solution solution = read_solution(config, solution_dir);
    const std::vector<ProbeCheck> checks = verify_solution(config, solution);
    const SimConfig sim = config.sim_config(Probe{});

    json probes = json::array();
    bool all = true;
    for (const ProbeCheck& c : checks) {
        all = all && c.pass;
        probes.push_back({{"x", c.probe.x},
                          {"regime", c.probe.regime + 1},
                          {"V", c.value},
                          {"mean", c.estimate.mean},
                          {"stderr", c.estimate.std_error},
                          {"n_paths", c.estimate.n_paths},
                          {"ruin_fraction", c.estimate.ruin_fraction},
                          {"abs_diff", c.gap},
                          {"bound", c.bound},
                          {"pass", c.pass}});
    }
    const json report = {
        {"dt_sim", sim.dt_sim}, {"t_max", sim.t_max}, {"n_paths", sim.n_paths},
        {"seed", sim.seed},     {"probes", probes},   {"pass", all},
    };
    fs::create_directories(out);
    write_file(out / "verify.json", report.dump(2) + "\n");
    return checks;
}

std::vector<SweepRow> sweep(const RunConfig& config, std::span<const double> steps) {
    std::vector<SweepRow> rows;
    const std::size_t np = config.probes.size();
    for (std::size_t i = 0; i < steps.size(); ++i) {
        RunConfig c = config;
        c.h = steps[i];
        const SolveOutcome o = solve_config(c);
        for (std::size_t p = 0; p < np; ++p) {
            SweepRow row;
            row.h = steps[i];
            row.probe = config.probes[p];
            row.value = o.probe_values[p];
            row.converged = o.solution.converged;
            if (i > 0) {
                const SweepRow& prev = rows[rows.size() - np];
                row.diff = std::abs(row.value - prev.value);
                if (prev.diff && *row.diff > 0.0) {
                    row.ratio = *prev.diff / *row.diff;
                    row.order = std::log2(*row.ratio);
                }
            }
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, std::span<const double> steps, const fs::path& out) {
    const std::vector<SweepRow> rows = sweep(config, steps);
    auto cell = [](const std::optional<double>& v) { return v ? fixed9(*v) : std::string(); };
    std::string csv = "h,x,regime,V,diff,ratio,order\n";
    for (const SweepRow& r : rows)
        csv += fixed9(r.h) + "," + fixed9(r.probe.x) + "," + std::to_string(r.probe.regime + 1) + "," + fixed9(r.value) +
               "," + cell(r.diff) + "," + cell(r.ratio) + "," + cell(r.order) + "\n";
    fs::create_directories(out);
    write_file(out / "sweep.csv", csv);
    return rows;
}

std::string oracle_report(double mu, double sigma2, double r) {
    if (!(sigma2 > 0.0)) throw Error(ErrorCode::OracleUndefined, "barrier oracle needs sigma^2 > 0");
    const double sigma = std::sqrt(sigma2);
    const double b = oracle_optimal_barrier(mu, sigma, r);
    std::ostringstream os;
    os << "b* = " << fixed9(b) << "\n";
    os << "x,V\n";
    const double top = std::max(2.0 * b, 10.0);
    for (int i = 0; i <= 20; ++i) {
        const double x = top * i / 20.0;
        os << fixed9(x) << "," << fixed9(oracle_barrier_value(mu, sigma, r, x, b)) << "\n";
    }
    return os.str();
}

}  // namespace divctl
