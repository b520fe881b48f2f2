#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "divctl/error.hpp"

namespace divctl {

// ---------------------------------------------------------------------------
// Claim size laws, described by their survival function P(Y > x).
// ---------------------------------------------------------------------------

struct ExponentialClaim {
    double rate = 1.0;
};

struct UniformClaim {
    double lo = 0.0;
    double hi = 1.0;
};

/// Piecewise-linear survival function through the given points. Beyond the
/// last abscissa the survival is zero (any remaining mass sits at the last point).
struct TabulatedClaim {
    std::vector<double> x;
    std::vector<double> survival;
};

using ClaimDistribution = std::variant<ExponentialClaim, UniformClaim, TabulatedClaim>;

/// P(Y > x) for x >= 0.
double survival(const ClaimDistribution& dist, double x);

/// Largest retention for which truncated moments are defined (infinity for exponential).
double support_upper(const ClaimDistribution& dist);

struct Moments {
    double first = 0.0;   ///< E[min(Y, u)]
    double second = 0.0;  ///< E[min(Y, u)^2]
};

/// m1 = int_0^u S(x) dx and m2 = int_0^u 2x S(x) dx.
///
/// Exponential and uniform laws use closed forms. Tables use composite
/// trapezoid panels no wider than u/1000, refined at every table node.
Moments truncated_moments(const ClaimDistribution& dist, double u);

/// Untruncated E[Y], E[Y^2]. A table uses its whole support.
Moments full_moments(const ClaimDistribution& dist);

// ---------------------------------------------------------------------------
// Regimes
// ---------------------------------------------------------------------------

/// Generator of the modulating Markov chain together with per-regime claim intensity.
struct RegimeSet {
    std::vector<double> beta;              ///< claim arrival rate per regime
    std::vector<std::vector<double>> q;    ///< generator, row-major, q[l][i] per unit time

    std::size_t count() const noexcept { return beta.size(); }
};

// ---------------------------------------------------------------------------
// Payoff
// ---------------------------------------------------------------------------

struct ConstantWeight {
    double value = 1.0;
};

/// c(x) = lambda * exp(-lambda * x), the differential marginal yield.
struct ExpMarginalWeight {
    double lambda = 1.0;
};

using DividendWeight = std::variant<ConstantWeight, ExpMarginalWeight>;

struct ZeroReward {};

/// Running reward on a (x, u) lattice per regime, bilinear in between and
/// clamped outside the lattice. values[l][ix][iu].
struct TabulatedReward {
    std::vector<double> x;
    std::vector<double> u;
    std::vector<std::vector<std::vector<double>>> values;
};

using RunningReward = std::variant<ZeroReward, TabulatedReward>;

struct PayoffSpec {
    DividendWeight dividend = ConstantWeight{};
    RunningReward running = ZeroReward{};
    double r = 0.05;  ///< discount rate
};

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

enum class Reinsurance { Proportional, ExcessOfLoss };

/// Compact retention set [u_min, u_max], discretized by a uniform mesh.
struct ControlSet {
    double u_min = 0.0;
    double u_max = 1.0;
    std::size_t n_u = 101;

    std::vector<double> mesh() const;
};

struct ModelSpec {
    Reinsurance reinsurance = Reinsurance::Proportional;
    ClaimDistribution claim = ExponentialClaim{};
    RegimeSet regimes;
    PayoffSpec payoff;
    ControlSet control;
};

/// Drift and volatility of the surplus diffusion under a given retention.
struct Coefficients {
    double drift = 0.0;
    double vol = 0.0;

    double variance() const noexcept { return vol * vol; }
};

/// Diffusion approximation of the Cramer-Lundberg surplus under cheap reinsurance.
///
/// Proportional: b = beta * u * E[Y], sigma = u * sqrt(beta * E[Y^2]).
/// Excess-of-loss: b = beta * m1(u), sigma = sqrt(beta * m2(u)).
///
/// The coefficients do not depend on the surplus level.
Coefficients drift_vol(const ModelSpec& model, std::size_t regime, double u);

/// c(x, l). Throws BadState for x < 0.
double dividend_weight(const PayoffSpec& payoff, double x, std::size_t regime);

/// int_lo^hi c(y, l) dy, the weight of a lump dividend that lowers the surplus from hi to lo.
double dividend_weight_integral(const PayoffSpec& payoff, double lo, double hi, std::size_t regime);

/// f(x, l, u).
double running_reward(const PayoffSpec& payoff, double x, std::size_t regime, double u);

bool has_running_reward(const PayoffSpec& payoff);

/// One broken model invariant. `field` names the offending part of the model
/// (e.g. "regimes.q[0]", "control.n_u").
struct Violation {
    std::string field;
    std::string message;
};

/// Every broken invariant of the model, in a stable order. Empty means valid.
std::vector<Violation> validate(const ModelSpec& model);

}  // namespace divctl
