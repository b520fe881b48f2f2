#include "divctl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace divctl {

namespace {

constexpr std::size_t kContractionWindow = 10;
// Sweep changes below this multiple of eps * max|V| are dominated by round-off.
constexpr double kRoundoffFloor = 1e5 * std::numeric_limits<double>::epsilon();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> control_mesh(const ModelSpec& model, const SolverOptions& options) {
    if (options.fixed_control) {
        const double u = *options.fixed_control;
        if (u < model.control.u_min || u > model.control.u_max)
            throw Error(ErrorCode::InvalidRetention, "fixed control outside [u_min, u_max]");
        return {u};
    }
    return model.control.mesh();
}

// Largest regular-branch value at (k, l); no argmax bookkeeping.
double regular_max(const DiscreteProblem& p, std::span<const double> V, std::size_t k, std::size_t l) {
    const std::size_t m = p.regimes();
    const KernelTable& kt = p.kernels();
    const auto up = kt.up(l);
    const auto down = kt.down(l);
    const double v_up = V[(k + 1) * m + l];
    const double v_down = V[(k - 1) * m + l];
    const std::size_t n = up.size();
    const auto run = p.running(k, l);

    double best = -std::numeric_limits<double>::infinity();
    if (m == 1 && run.empty()) {
        for (std::size_t c = 0; c < n; ++c) best = std::max(best, up[c] * v_up + down[c] * v_down);
    } else if (m == 2 && run.empty()) {
        const auto sw = kt.to_regime(l, 1 - l);
        const double v_sw = V[k * m + (1 - l)];
        for (std::size_t c = 0; c < n; ++c)
            best = std::max(best, up[c] * v_up + down[c] * v_down + sw[c] * v_sw);
    } else {
        for (std::size_t c = 0; c < n; ++c) {
            double s = up[c] * v_up + down[c] * v_down;
            for (std::size_t i = 0; i < m; ++i)
                if (i != l) s += kt.to_regime(l, i)[c] * V[k * m + i];
            if (!run.empty()) s += run[c];
            best = std::max(best, s);
        }
    }
    return best;
}

double regular_at(const DiscreteProblem& p, std::span<const double> V, std::size_t k, std::size_t l,
                  std::size_t c) {
    const std::size_t m = p.regimes();
    const KernelTable& kt = p.kernels();
    double s = kt.up(l)[c] * V[(k + 1) * m + l] + kt.down(l)[c] * V[(k - 1) * m + l];
    for (std::size_t i = 0; i < m; ++i)
        if (i != l) s += kt.to_regime(l, i)[c] * V[k * m + i];
    const auto run = p.running(k, l);
    if (!run.empty()) s += run[c];
    return s;
}

bool singular_wins(double singular, double regular, double dividend) {
    return singular > regular || (singular == regular && dividend > 0.0);
}

// Fills action, u_star and barrier from the current values.
void extract_policy(const DiscreteProblem& p, Solution& s) {
    const std::size_t m = p.regimes();
    for (std::size_t l = 0; l < m; ++l) {
        s.u_star[s.index(0, l)] = kNaN;
        s.action[s.index(0, l)] = Action::Regular;
        s.u_star[s.index(p.grid().reflecting_index(), l)] = kNaN;
        s.action[s.index(p.grid().reflecting_index(), l)] = Action::Singular;
    }
    for (std::size_t k = 1; k <= p.grid().cap_index(); ++k) {
        for (std::size_t l = 0; l < m; ++l) {
            const BellmanResult b = bellman_value(p, s.value, k, l);
            s.action[s.index(k, l)] = b.action;
            s.u_star[s.index(k, l)] = b.u_star ? *b.u_star : kNaN;
        }
    }
    s.barrier = extract_barrier(s).level;
}

}  // namespace

DiscreteProblem::DiscreteProblem(const ModelSpec& model, const Grid& grid, const SolverOptions& options)
    : model_(model), grid_(grid), options_(options),
      kernels_(model, grid, control_mesh(model, options), options.discounting) {
    const std::size_t m = model.regimes.count();
    dividend_.resize(grid.size() * m);
    for (std::size_t k = 0; k < grid.size(); ++k)
        for (std::size_t l = 0; l < m; ++l)
            dividend_[k * m + l] = dividend_weight(model.payoff, grid.x(k), l) * grid.h();

    if (has_running_reward(model.payoff)) {
        const std::size_t n = kernels_.control_count();
        running_.assign(grid.size() * m * n, 0.0);
        for (std::size_t k = 1; k <= grid.cap_index(); ++k)
            for (std::size_t l = 0; l < m; ++l)
                for (std::size_t c = 0; c < n; ++c)
                    running_[(k * m + l) * n + c] =
                        running_reward(model.payoff, grid.x(k), l, kernels_.controls()[c]) * kernels_.dt(l)[c];
    }
}

std::span<const double> DiscreteProblem::running(std::size_t k, std::size_t regime) const {
    if (running_.empty()) return {};
    const std::size_t n = kernels_.control_count();
    return {running_.data() + (k * regimes() + regime) * n, n};
}

BellmanResult bellman_value(const DiscreteProblem& p, std::span<const double> V, std::size_t k,
                            std::size_t regime) {
    if (!p.grid().is_interior(k))
        throw Error(ErrorCode::BadState, "Bellman update needs an interior state, got " + std::to_string(k));
    if (regime >= p.regimes()) throw Error(ErrorCode::BadRegime, "regime index out of range");

    BellmanResult r;
    const std::size_t n = p.kernels().control_count();
    r.regular_value = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
        const double v = regular_at(p, V, k, regime, c);
        if (v > r.regular_value) {
            r.regular_value = v;
            r.control_index = c;
        }
    }
    const double dividend = p.dividend(k, regime);
    r.singular_value = V[(k - 1) * p.regimes() + regime] + dividend;
    if (singular_wins(r.singular_value, r.regular_value, dividend)) {
        r.value = r.singular_value;
        r.action = Action::Singular;
    } else {
        r.value = r.regular_value;
        r.action = Action::Regular;
        r.u_star = p.kernels().controls()[r.control_index];
    }
    return r;
}

BellmanResult bellman_value(const ModelSpec& model, const Grid& grid, std::span<const double> V, std::size_t k,
                            std::size_t regime, const SolverOptions& options) {
    return bellman_value(DiscreteProblem(model, grid, options), V, k, regime);
}

Solution solve_value_iteration(const ModelSpec& model, const Grid& grid, const SolverOptions& options) {
    if (!(options.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
    const DiscreteProblem p(model, grid, options);
    const std::size_t m = p.regimes();
    const std::size_t top = grid.reflecting_index();

    Solution s(grid, m);
    s.controls = p.kernels().controls();
    std::vector<double>& V = s.value;
    std::deque<double> deltas;
    // Sweeps whose change is still above round-off, for the contraction diagnostic.
    std::deque<double> geometric;

    while (s.iterations < options.max_iter) {
        double delta = 0.0;
        double vmax = 0.0;
        for (std::size_t k = 1; k < top; ++k) {
            for (std::size_t l = 0; l < m; ++l) {
                const std::size_t i = k * m + l;
                const double regular = regular_max(p, V, k, l);
                const double singular = V[i - m] + p.dividend(k, l);
                const double next = std::max(regular, singular);
                if (next < V[i]) s.monotone_sweeps = false;
                delta = std::max(delta, std::abs(next - V[i]));
                vmax = std::max(vmax, std::abs(next));
                V[i] = next;
            }
        }
        for (std::size_t l = 0; l < m; ++l) {
            const std::size_t i = top * m + l;
            const double next = V[i - m] + p.dividend(top, l);
            if (next < V[i]) s.monotone_sweeps = false;
            delta = std::max(delta, std::abs(next - V[i]));
            V[i] = next;
        }
        ++s.iterations;
        s.final_delta = delta;
        deltas.push_back(delta);
        if (deltas.size() > kContractionWindow + 1) deltas.pop_front();
        if (delta > kRoundoffFloor * vmax) {
            geometric.push_back(delta);
            if (geometric.size() > kContractionWindow) geometric.pop_front();
        }

        if (delta == 0.0) {
            s.converged = true;
            break;
        }
        if (deltas.size() == kContractionWindow + 1) {
            double rho = 0.0;
            for (std::size_t j = 1; j < deltas.size(); ++j) rho = std::max(rho, deltas[j] / deltas[j - 1]);
            if (rho < 1.0 && delta * rho / (1.0 - rho) <= options.tol) {
                s.converged = true;
                break;
            }
        }
    }

    s.recent_deltas.assign(geometric.begin(), geometric.end());
    extract_policy(p, s);
    s.residual = qvi_residual(model, s);
    return s;
}

namespace {

// Solves for the value of a fixed stationary policy. policy[i] is the control index
// for regular states, or -1 for singular ones.
void evaluate_policy(const DiscreteProblem& p, const std::vector<long>& policy, std::vector<double>& V) {
    const std::size_t m = p.regimes();
    const std::size_t top = p.grid().reflecting_index();
    const auto n = static_cast<Eigen::Index>(p.grid().size() * m);
    const KernelTable& kt = p.kernels();

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * (3 + m));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    auto at = [m](std::size_t k, std::size_t l) { return static_cast<Eigen::Index>(k * m + l); };

    for (std::size_t l = 0; l < m; ++l) {
        trip.emplace_back(at(0, l), at(0, l), 1.0);
        for (std::size_t k = 1; k < top; ++k) {
            const Eigen::Index row = at(k, l);
            trip.emplace_back(row, row, 1.0);
            const long c = policy[static_cast<std::size_t>(row)];
            if (c < 0) {
                trip.emplace_back(row, at(k - 1, l), -1.0);
                rhs[row] = p.dividend(k, l);
                continue;
            }
            const auto cu = static_cast<std::size_t>(c);
            trip.emplace_back(row, at(k + 1, l), -kt.up(l)[cu]);
            trip.emplace_back(row, at(k - 1, l), -kt.down(l)[cu]);
            for (std::size_t i = 0; i < m; ++i)
                if (i != l) trip.emplace_back(row, at(k, i), -kt.to_regime(l, i)[cu]);
            const auto run = p.running(k, l);
            if (!run.empty()) rhs[row] = run[cu];
        }
        trip.emplace_back(at(top, l), at(top, l), 1.0);
        trip.emplace_back(at(top, l), at(top - 1, l), -1.0);
        rhs[at(top, l)] = p.dividend(top, l);
    }

    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw Error(ErrorCode::DegenerateKernel, "policy evaluation system is singular");
    const Eigen::VectorXd x = lu.solve(rhs);
    V.assign(x.data(), x.data() + n);
}

}  // namespace

Solution solve_policy_iteration(const ModelSpec& model, const Grid& grid, const SolverOptions& options) {
    if (!(options.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
    const DiscreteProblem p(model, grid, options);
    const std::size_t m = p.regimes();
    const std::size_t top = grid.reflecting_index();

    Solution s(grid, m);
    s.controls = p.kernels().controls();
    std::vector<long> policy(grid.size() * m, -2);
    std::vector<double> next;

    while (s.iterations < options.max_iter) {
        bool changed = false;
        for (std::size_t k = 1; k < top; ++k) {
            for (std::size_t l = 0; l < m; ++l) {
                const BellmanResult b = bellman_value(p, s.value, k, l);
                const long choice = b.action == Action::Singular ? -1 : static_cast<long>(b.control_index);
                long& slot = policy[k * m + l];
                if (slot != choice) {
                    slot = choice;
                    changed = true;
                }
            }
        }
        if (!changed) {
            s.converged = true;
            break;
        }
        evaluate_policy(p, policy, next);
        double delta = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) delta = std::max(delta, std::abs(next[i] - s.value[i]));
        s.value.swap(next);
        s.final_delta = delta;
        ++s.iterations;
        // A policy that only moved between tied actions leaves the values unchanged.
        if (delta <= options.tol / 10.0) {
            s.converged = true;
            break;
        }
    }

    extract_policy(p, s);
    s.residual = qvi_residual(model, s);
    return s;
}

Solution solve(const ModelSpec& model, const Grid& grid, Method method, const SolverOptions& options) {
    return method == Method::ValueIteration ? solve_value_iteration(model, grid, options)
                                            : solve_policy_iteration(model, grid, options);
}

BarrierReport extract_barrier(const Solution& s) {
    BarrierReport r;
    r.level.resize(s.regimes);
    r.upper_interval.assign(s.regimes, true);
    const std::size_t cap = s.grid.cap_index();
    for (std::size_t l = 0; l < s.regimes; ++l) {
        std::optional<std::size_t> first;
        for (std::size_t k = 1; k <= cap; ++k) {
            const bool singular = s.action_at(k, l) == Action::Singular;
            if (singular && !first) first = k;
            if (first && !singular) r.upper_interval[l] = false;
        }
        if (first) r.level[l] = s.grid.x(*first);
    }
    return r;
}

double qvi_residual(const ModelSpec& model, const Solution& s) {
    const std::size_t m = s.regimes;
    const double h = s.grid.h();
    const double r = model.payoff.r;
    const auto& q = model.regimes.q;

    std::vector<Coefficients> coefs(m * s.controls.size());
    for (std::size_t l = 0; l < m; ++l)
        for (std::size_t c = 0; c < s.controls.size(); ++c)
            coefs[l * s.controls.size() + c] = drift_vol(model, l, s.controls[c]);

    double worst = 0.0;
    for (std::size_t k = 1; k <= s.grid.cap_index(); ++k) {
        const double x = s.grid.x(k);
        for (std::size_t l = 0; l < m; ++l) {
            const double v = s.V(k, l);
            const double forward = (s.V(k + 1, l) - v) / h;
            const double backward = (v - s.V(k - 1, l)) / h;
            const double second = (s.V(k + 1, l) - 2.0 * v + s.V(k - 1, l)) / (h * h);
            double coupling = 0.0;
            for (std::size_t i = 0; i < m; ++i) coupling += q[l][i] * s.V(k, i);

            double generator = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < s.controls.size(); ++c) {
                const Coefficients& cf = coefs[l * s.controls.size() + c];
                const double term = forward * std::max(cf.drift, 0.0) - backward * std::max(-cf.drift, 0.0) +
                                    0.5 * cf.variance() * second + coupling - r * v +
                                    running_reward(model.payoff, x, l, s.controls[c]);
                generator = std::max(generator, term);
            }
            const double gradient = dividend_weight(model.payoff, x, l) - backward;
            worst = std::max(worst, std::abs(std::max(generator, gradient)));
        }
    }
    return worst;
}

InvariantReport check_invariants(const ModelSpec& model, const Solution& s) {
    InvariantReport rep;
    const std::size_t m = s.regimes;
    const double h = s.grid.h();
    for (std::size_t l = 0; l < m; ++l) {
        rep.boundary_zero = rep.boundary_zero && s.V(0, l) == 0.0;
        for (std::size_t k = 1; k <= s.grid.cap_index(); ++k) {
            const double step = s.V(k, l) - s.V(k - 1, l);
            const double ch = dividend_weight(model.payoff, s.grid.x(k), l) * h;
            rep.monotonicity = std::max(rep.monotonicity, s.V(k, l) - s.V(k + 1, l));
            rep.gradient = std::max(rep.gradient, ch - step);
            if (s.action_at(k, l) == Action::Singular)
                rep.singular_gap = std::max(rep.singular_gap, std::abs(step - ch));
            rep.concavity = std::max(rep.concavity, s.V(k + 1, l) - 2.0 * s.V(k, l) + s.V(k - 1, l));
        }
    }
    rep.monotone_sweeps = s.monotone_sweeps;
    if (s.recent_deltas.size() >= 2) {
        double rho = 0.0;
        for (std::size_t j = 1; j < s.recent_deltas.size(); ++j)
            if (s.recent_deltas[j - 1] > 0.0) rho = std::max(rho, s.recent_deltas[j] / s.recent_deltas[j - 1]);
        rep.contraction_ratio = rho;
    }
    return rep;
}

double sup_distance(const Solution& a, const Solution& b) {
    if (a.value.size() != b.value.size())
        throw Error(ErrorCode::InvalidArgument, "solutions live on different grids");
    double d = 0.0;
    for (std::size_t i = 0; i < a.value.size(); ++i) d = std::max(d, std::abs(a.value[i] - b.value[i]));
    return d;
}

}  // namespace divctl
