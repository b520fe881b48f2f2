#include "divctl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace divctl {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::InvalidRetention: return "invalid-retention";
        case ErrorCode::OutOfSupport: return "out-of-support";
        case ErrorCode::BadRegime: return "bad-regime";
        case ErrorCode::BadState: return "bad-state";
        case ErrorCode::DegenerateKernel: return "degenerate-kernel";
        case ErrorCode::CannotPayAtRuin: return "cannot-pay-at-ruin";
        case ErrorCode::NotAtReflectingBoundary: return "not-at-reflecting-boundary";
        case ErrorCode::MissingPolicy: return "missing-policy";
        case ErrorCode::OracleUndefined: return "oracle-undefined";
    }
    return "unknown";
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double table_survival(const TabulatedClaim& t, double x) {
    if (x < t.x.front()) return 1.0;
    if (x > t.x.back()) return 0.0;
    auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
    if (it == t.x.end()) return t.survival.back();
    const std::size_t i = static_cast<std::size_t>(it - t.x.begin());
    const double x0 = t.x[i - 1], x1 = t.x[i];
    const double w = (x - x0) / (x1 - x0);
    return (1.0 - w) * t.survival[i - 1] + w * t.survival[i];
}

Moments table_moments(const TabulatedClaim& t, double u) {
    Moments m;
    if (u == 0.0) return m;
    const double max_panel = u / 1000.0;

    // Breakpoints: 0, every table node inside (0, u), and u itself.
    std::vector<double> breaks{0.0};
    for (double x : t.x)
        if (x > 0.0 && x < u) breaks.push_back(x);
    breaks.push_back(u);

    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double a = breaks[s], b = breaks[s + 1];
        const auto panels = static_cast<std::size_t>(std::ceil((b - a) / max_panel));
        const double w = (b - a) / static_cast<double>(panels);
        double prev_x = a;
        double prev_s = table_survival(t, a);
        for (std::size_t k = 1; k <= panels; ++k) {
            const double x = (k == panels) ? b : a + static_cast<double>(k) * w;
            const double sx = table_survival(t, x);
            const double dx = x - prev_x;
            m.first += 0.5 * dx * (prev_s + sx);
            m.second += 0.5 * dx * (2.0 * prev_x * prev_s + 2.0 * x * sx);
            prev_x = x;
            prev_s = sx;
        }
    }
    return m;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

double survival(const ClaimDistribution& dist, double x) {
    if (x < 0.0) return 1.0;
    return std::visit(overloaded{
                          [&](const ExponentialClaim& e) { return std::exp(-e.rate * x); },
                          [&](const UniformClaim& un) {
                              if (x <= un.lo) return 1.0;
                              if (x >= un.hi) return 0.0;
                              return (un.hi - x) / (un.hi - un.lo);
                          },
                          [&](const TabulatedClaim& t) { return table_survival(t, x); },
                      },
                      dist);
}

double support_upper(const ClaimDistribution& dist) {
    return std::visit(overloaded{
                          [](const ExponentialClaim&) { return std::numeric_limits<double>::infinity(); },
                          [](const UniformClaim& un) { return un.hi; },
                          [](const TabulatedClaim& t) { return t.x.back(); },
                      },
                      dist);
}

Moments truncated_moments(const ClaimDistribution& dist, double u) {
    if (!(u >= 0.0)) throw Error(ErrorCode::InvalidRetention, "retention " + fmt(u) + " is negative");

    return std::visit(
        overloaded{
            [&](const ExponentialClaim& e) {
                const double lu = e.rate * u;
                const double tail = std::exp(-lu);
                return Moments{-std::expm1(-lu) / e.rate,
                               2.0 / (e.rate * e.rate) * (1.0 - tail * (1.0 + lu))};
            },
            [&](const UniformClaim& un) {
                // S = 1 on [0, lo], linear down to 0 on [lo, hi], 0 afterwards.
                const double a = std::min(u, un.lo);
                Moments m{a, a * a};
                if (u > un.lo) {
                    const double v = std::min(u, un.hi);
                    const double w = un.hi - un.lo;
                    m.first += (w * w - (un.hi - v) * (un.hi - v)) / (2.0 * w);
                    m.second += (un.hi * (v * v - un.lo * un.lo) -
                                 2.0 * (v * v * v - un.lo * un.lo * un.lo) / 3.0) / w;
                }
                return m;
            },
            [&](const TabulatedClaim& t) {
                if (u > t.x.back())
                    throw Error(ErrorCode::OutOfSupport,
                                "retention " + fmt(u) + " beyond table support " + fmt(t.x.back()));
                return table_moments(t, u);
            },
        },
        dist);
}

Moments full_moments(const ClaimDistribution& dist) {
    return std::visit(overloaded{
                          [](const ExponentialClaim& e) {
                              return Moments{1.0 / e.rate, 2.0 / (e.rate * e.rate)};
                          },
                          [&](const UniformClaim& un) { return truncated_moments(dist, un.hi); },
                          [&](const TabulatedClaim& t) { return truncated_moments(dist, t.x.back()); },
                      },
                      dist);
}

std::vector<double> ControlSet::mesh() const {
    std::vector<double> out(n_u);
    if (n_u == 1) {
        out[0] = u_min;
        return out;
    }
    for (std::size_t k = 0; k < n_u; ++k)
        out[k] = u_min + static_cast<double>(k) * (u_max - u_min) / static_cast<double>(n_u - 1);
    out.back() = u_max;
    return out;
}

Coefficients drift_vol(const ModelSpec& model, std::size_t regime, double u) {
    if (regime >= model.regimes.count())
        throw Error(ErrorCode::BadRegime, "regime index " + std::to_string(regime) + " out of range");
    if (!(u >= 0.0)) throw Error(ErrorCode::InvalidRetention, "retention " + fmt(u) + " is negative");
    const double beta = model.regimes.beta[regime];

    if (model.reinsurance == Reinsurance::Proportional) {
        const Moments full = full_moments(model.claim);
        return {beta * u * full.first, u * std::sqrt(beta * full.second)};
    }
    // Beyond the support the truncation is inactive.
    const Moments m = truncated_moments(model.claim, std::min(u, support_upper(model.claim)));
    return {beta * m.first, std::sqrt(beta * m.second)};
}

double dividend_weight(const PayoffSpec& payoff, double x, std::size_t /*regime*/) {
    if (!(x >= 0.0)) throw Error(ErrorCode::BadState, "surplus " + fmt(x) + " is negative");
    return std::visit(overloaded{
                          [](const ConstantWeight& c) { return c.value; },
                          [&](const ExpMarginalWeight& c) { return c.lambda * std::exp(-c.lambda * x); },
                      },
                      payoff.dividend);
}

double dividend_weight_integral(const PayoffSpec& payoff, double lo, double hi, std::size_t /*regime*/) {
    if (!(lo >= 0.0)) throw Error(ErrorCode::BadState, "surplus " + fmt(lo) + " is negative");
    if (hi <= lo) return 0.0;
    return std::visit(overloaded{
                          [&](const ConstantWeight& c) { return c.value * (hi - lo); },
                          [&](const ExpMarginalWeight& c) {
                              return std::exp(-c.lambda * lo) - std::exp(-c.lambda * hi);
                          },
                      },
                      payoff.dividend);
}

namespace {

// Index i with nodes[i] <= v <= nodes[i+1] and the interpolation weight, clamped.
std::pair<std::size_t, double> bracket(const std::vector<double>& nodes, double v) {
    if (nodes.size() == 1 || v <= nodes.front()) return {0, 0.0};
    if (v >= nodes.back()) return {nodes.size() - 2, 1.0};
    auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
    const std::size_t i = static_cast<std::size_t>(it - nodes.begin()) - 1;
    return {i, (v - nodes[i]) / (nodes[i + 1] - nodes[i])};
}

}  // namespace

double running_reward(const PayoffSpec& payoff, double x, std::size_t regime, double u) {
    return std::visit(overloaded{
                          [](const ZeroReward&) { return 0.0; },
                          [&](const TabulatedReward& t) {
                              const auto& table = t.values.at(regime);
                              const auto [ix, wx] = bracket(t.x, x);
                              const auto [iu, wu] = bracket(t.u, u);
                              const std::size_t jx = std::min(ix + 1, t.x.size() - 1);
                              const std::size_t ju = std::min(iu + 1, t.u.size() - 1);
                              const double lo = (1 - wu) * table[ix][iu] + wu * table[ix][ju];
                              const double hi = (1 - wu) * table[jx][iu] + wu * table[jx][ju];
                              return (1 - wx) * lo + wx * hi;
                          },
                      },
                      payoff.running);
}

bool has_running_reward(const PayoffSpec& payoff) {
    return !std::holds_alternative<ZeroReward>(payoff.running);
}

std::vector<Violation> validate(const ModelSpec& model) {
    std::vector<Violation> out;
    auto add = [&out](std::string field, std::string message) {
        out.push_back({std::move(field), std::move(message)});
    };
    const auto& reg = model.regimes;
    const std::size_t m = reg.count();

    if (m == 0) add("regimes.beta", "at least one regime is required");
    for (std::size_t l = 0; l < m; ++l)
        if (!(reg.beta[l] > 0.0))
            add("regimes.beta[" + std::to_string(l) + "]",
                "claim rate of regime " + std::to_string(l) + " must be positive, got " + fmt(reg.beta[l]));

    bool generator_shape_ok = reg.q.size() == m;
    for (const auto& row : reg.q) generator_shape_ok = generator_shape_ok && row.size() == m;
    if (!generator_shape_ok) {
        add("regimes.q", "generator must be " + std::to_string(m) + "x" + std::to_string(m));
    } else {
        for (std::size_t l = 0; l < m; ++l) {
            double sum = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                sum += reg.q[l][i];
                if (i != l && reg.q[l][i] < 0.0)
                    add("regimes.q[" + std::to_string(l) + "][" + std::to_string(i) + "]",
                        "generator entry (" + std::to_string(l) + "," + std::to_string(i) +
                            ") is negative: " + fmt(reg.q[l][i]));
            }
            if (std::abs(sum) > 1e-12)
                add("regimes.q[" + std::to_string(l) + "]", "generator row " + std::to_string(l) + " sums to " + fmt(sum));
        }
    }

    if (!(model.payoff.r > 0.0)) add("payoff.r", "discount rate must be positive, got " + fmt(model.payoff.r));

    std::visit(overloaded{
                   [&](const ExponentialClaim& e) {
                       if (!(e.rate > 0.0)) add("claim.rate", "exponential claim rate must be positive");
                   },
                   [&](const UniformClaim& un) {
                       if (!(un.lo >= 0.0 && un.lo < un.hi))
                           add("claim", "uniform claim needs 0 <= lo < hi, got [" + fmt(un.lo) + ", " + fmt(un.hi) + "]");
                   },
                   [&](const TabulatedClaim& t) {
                       if (t.x.size() != t.survival.size() || t.x.size() < 2) {
                           add("claim", "claim table needs at least 2 points and matching columns");
                           return;
                       }
                       if (t.x.front() < 0.0) add("claim.x", "claim table abscissae must be nonnegative");
                       if (t.survival.front() != 1.0) add("claim.survival", "claim table survival must start at 1");
                       for (std::size_t i = 1; i < t.x.size(); ++i) {
                           if (!(t.x[i] > t.x[i - 1])) {
                               add("claim.x", "claim table abscissae not strictly increasing at row " + std::to_string(i));
                               break;
                           }
                       }
                       for (std::size_t i = 0; i < t.survival.size(); ++i) {
                           const double s = t.survival[i];
                           if (s < 0.0 || s > 1.0 || (i > 0 && s > t.survival[i - 1])) {
                               add("claim.survival",
                               "claim table survival must be nonincreasing in [0,1] (row " + std::to_string(i) + ")");
                               break;
                           }
                       }
                   },
               },
               model.claim);

    const auto& ctl = model.control;
    if (ctl.n_u < 2) add("control.n_u", "control mesh needs ≥ 2 points");
    if (!(ctl.u_min >= 0.0)) add("control.u_min", "control u_min must be nonnegative, got " + fmt(ctl.u_min));
    if (!(ctl.u_min < ctl.u_max))
        add("control.u_max", "control needs u_min < u_max, got [" + fmt(ctl.u_min) + ", " + fmt(ctl.u_max) + "]");
    if (model.reinsurance == Reinsurance::ExcessOfLoss &&
        std::holds_alternative<TabulatedClaim>(model.claim) && out.empty() &&
        ctl.u_max > support_upper(model.claim))
        add("control.u_max", "control u_max " + fmt(ctl.u_max) + " exceeds claim table support " +
                                   fmt(support_upper(model.claim)));

    std::visit(overloaded{
                   [&](const ConstantWeight& c) {
                       if (!(c.value >= 0.0)) add("payoff.dividend", "dividend weight must be nonnegative");
                   },
                   [&](const ExpMarginalWeight& c) {
                       if (!(c.lambda > 0.0)) add("payoff.dividend", "marginal-yield lambda must be positive");
                   },
               },
               model.payoff.dividend);

    if (const auto* t = std::get_if<TabulatedReward>(&model.payoff.running)) {
        bool ok = !t->x.empty() && !t->u.empty() && t->values.size() == m;
        for (const auto& per_regime : t->values) {
            ok = ok && per_regime.size() == t->x.size();
            for (const auto& row : per_regime) ok = ok && row.size() == t->u.size();
        }
        if (!ok) add("payoff.running", "running reward table shape must be regimes x len(x) x len(u)");
        if (!std::is_sorted(t->x.begin(), t->x.end()) || !std::is_sorted(t->u.begin(), t->u.end()))
            add("payoff.running", "running reward nodes must be sorted");
    }

    // Coefficients must be finite over the whole control range.
    if (out.empty()) {
        for (std::size_t l = 0; l < m; ++l) {
            for (double u : ctl.mesh()) {
                const Coefficients c = drift_vol(model, l, u);
                if (!std::isfinite(c.drift) || !std::isfinite(c.vol)) {
                    add("model", "non-finite drift/volatility in regime " + std::to_string(l) + " at u=" + fmt(u));
                    break;
                }
            }
        }
    }
    return out;
}

}  // namespace divctl
