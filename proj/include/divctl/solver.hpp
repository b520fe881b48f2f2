#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "divctl/chain.hpp"
#include "divctl/model.hpp"

namespace divctl {

enum class Action : std::uint8_t { Regular, Singular };

enum class Method { ValueIteration, PolicyIteration };

struct SolverOptions {
    double tol = 1e-9;
    std::size_t max_iter = 200000;
    Discounting discounting = Discounting::Linear;
    /// Restricts the regular branch to one retention (e.g. 0 for a pure-singular model).
    std::optional<double> fixed_control;
};

/// Discretized problem: model, lattice, cached kernels and per-state rewards.
class DiscreteProblem {
public:
    DiscreteProblem(const ModelSpec& model, const Grid& grid, const SolverOptions& options = {});

    const ModelSpec& model() const noexcept { return model_; }
    const Grid& grid() const noexcept { return grid_; }
    const KernelTable& kernels() const noexcept { return kernels_; }
    const SolverOptions& options() const noexcept { return options_; }
    std::size_t regimes() const noexcept { return kernels_.regimes(); }

    /// c(x_k, l) * h, the reward of one singular (or reflection) step from state k.
    double dividend(std::size_t k, std::size_t regime) const { return dividend_[k * regimes() + regime]; }

    /// f(x_k, l, u_c) * dt(l, u_c); empty when there is no running reward.
    std::span<const double> running(std::size_t k, std::size_t regime) const;

private:
    ModelSpec model_;
    Grid grid_;
    SolverOptions options_;
    KernelTable kernels_;
    std::vector<double> dividend_;
    std::vector<double> running_;
};

struct BellmanResult {
    double value = 0.0;
    Action action = Action::Regular;
    std::optional<double> u_star;       ///< set when the regular branch wins
    std::size_t control_index = 0;      ///< argmax over the control mesh (always filled)
    double regular_value = 0.0;
    double singular_value = 0.0;
};

/// One application of the dynamic programming operator at interior state k.
///
/// Ties between branches go to the singular branch whenever it pays a positive
/// dividend; ties on the control mesh go to the smallest retention.
/// V is laid out state-major, V[k * regimes + l].
BellmanResult bellman_value(const DiscreteProblem& problem, std::span<const double> V, std::size_t k,
                            std::size_t regime);

BellmanResult bellman_value(const ModelSpec& model, const Grid& grid, std::span<const double> V, std::size_t k,
                            std::size_t regime, const SolverOptions& options = {});

struct Solution {
    Solution(const Grid& g, std::size_t m)
        : grid(g), regimes(m), value(g.size() * m, 0.0), action(g.size() * m, Action::Regular),
          u_star(g.size() * m, 0.0), barrier(m) {}

    Grid grid;
    std::size_t regimes;
    std::vector<double> controls;  ///< mesh the regular branch maximized over

    std::vector<double> value;
    std::vector<Action> action;
    std::vector<double> u_star;  ///< NaN where the action is singular and at the ruin/reflecting states
    std::vector<std::optional<double>> barrier;

    std::size_t iterations = 0;
    double final_delta = 0.0;
    double residual = 0.0;
    bool converged = false;

    /// Value iteration only: every sweep was pointwise nondecreasing.
    bool monotone_sweeps = true;
    /// Value iteration only: sup-norm changes of the last (up to) 10 sweeps that changed V by
    /// more than round-off, oldest first.
    std::vector<double> recent_deltas;

    std::size_t index(std::size_t k, std::size_t l) const noexcept { return k * regimes + l; }
    double V(std::size_t k, std::size_t l) const { return value[index(k, l)]; }
    Action action_at(std::size_t k, std::size_t l) const { return action[index(k, l)]; }
    double u_at(std::size_t k, std::size_t l) const { return u_star[index(k, l)]; }

    /// Nearest-state value; exact on grid points.
    double value_at(double x, std::size_t l) const { return V(grid.nearest(x), l); }
};

/// Gauss-Seidel value iteration from V = 0, ascending in x with regimes innermost.
///
/// Stops when the distance to the fixed point, estimated from the last sweep change
/// and the observed contraction ratio, is at most tol (or the change is exactly 0).
Solution solve_value_iteration(const ModelSpec& model, const Grid& grid, const SolverOptions& options = {});

/// Howard policy iteration. Each evaluation is a direct sparse LU solve.
Solution solve_policy_iteration(const ModelSpec& model, const Grid& grid, const SolverOptions& options = {});

Solution solve(const ModelSpec& model, const Grid& grid, Method method, const SolverOptions& options = {});

struct BarrierReport {
    std::vector<std::optional<double>> level;  ///< smallest interior singular state per regime
    std::vector<bool> upper_interval;          ///< singular set is {x >= level} within (0, B]
};

BarrierReport extract_barrier(const Solution& solution);

/// Worst violation of the upwind finite-difference QVI over interior states,
/// in the units of the equation.
double qvi_residual(const ModelSpec& model, const Solution& solution);

/// Post-solve diagnostics. Violation magnitudes are 0 when the property holds.
struct InvariantReport {
    bool boundary_zero = true;
    double monotonicity = 0.0;     ///< max (V(x) - V(x+h))^+
    double gradient = 0.0;         ///< max (c h - (V(x) - V(x-h)))^+
    double singular_gap = 0.0;     ///< max |V(x) - V(x-h) - c h| over singular states
    double concavity = 0.0;        ///< max (V(x+h) - 2V(x) + V(x-h))^+ over interior states
    bool monotone_sweeps = true;
    std::optional<double> contraction_ratio;  ///< max ratio of successive deltas over the last sweeps
};

InvariantReport check_invariants(const ModelSpec& model, const Solution& solution);

double sup_distance(const Solution& a, const Solution& b);

}  // namespace divctl
