#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "divctl/chain.hpp"
#include "divctl/model.hpp"
#include "divctl/solver.hpp"

namespace divctl {

struct SimConfig {
    double dt_sim = 1e-3;       ///< Euler step
    double t_max = 400.0;       ///< horizon cap; t_max * r >= 20 keeps the tail below e^-20
    std::size_t n_paths = 100000;
    std::uint64_t seed = 20110515;
    double x0 = 10.0;
    std::size_t regime0 = 0;
    unsigned threads = 0;       ///< 0 = hardware concurrency; results do not depend on it
};

/// Broken SimConfig invariants for a given lattice and discount rate.
std::vector<std::string> validate(const SimConfig& cfg, const Grid& grid, double r);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double ruin_fraction = 0.0;
};

/// Discounted payoff of the policy stored in `solution`, simulated by Euler steps
/// with exact exponential regime clocks.
///
/// Retention comes from the nearest lattice state. Dividends are paid as an
/// instantaneous lump whenever the surplus exceeds the paid-down level of its
/// regime: one step below the barrier, since a singular move at the barrier
/// lands there (B when a regime has no barrier).
///
/// Path i draws from its own generator seeded by (seed, i), so the estimate is
/// bit-identical for any thread count.
McEstimate simulate_payoff(const ModelSpec& model, const Solution& solution, const SimConfig& cfg);

/// Level to which a lump dividend lowers the surplus in each regime.
std::vector<double> payout_levels(const Solution& solution);

// ---------------------------------------------------------------------------
// Single-regime dividend barrier oracle for dX = mu dt + sigma dW - dZ, c = 1.
// ---------------------------------------------------------------------------

struct CharacteristicRoots {
    double plus = 0.0;
    double minus = 0.0;
};

/// Roots of (sigma^2 / 2) theta^2 + mu theta - r = 0. Throws OracleUndefined if sigma = 0.
CharacteristicRoots oracle_roots(double mu, double sigma, double r);

/// Value of the barrier-b strategy started at x.
double oracle_barrier_value(double mu, double sigma, double r, double x, double b);

/// Barrier maximizing the value: the root of g''(b) = 0, clamped at 0 when mu <= 0.
double oracle_optimal_barrier(double mu, double sigma, double r);

}  // namespace divctl
