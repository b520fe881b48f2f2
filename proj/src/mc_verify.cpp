#include "divctl/mc_verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <variant>
#include <span>
#include <thread>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace divctl {

std::vector<std::string> validate(const SimConfig& cfg, const Grid& grid, double r) {
    std::vector<std::string> out;
    if (!(cfg.dt_sim > 0.0)) out.emplace_back("dt_sim must be positive");
    if (cfg.dt_sim > grid.h() * grid.h() * (1.0 + 1e-12))
        out.push_back("dt_sim " + std::to_string(cfg.dt_sim) + " exceeds h^2 = " + std::to_string(grid.h() * grid.h()));
    if (cfg.t_max * r < 20.0) out.emplace_back("t_max * r must be at least 20");
    if (cfg.n_paths < 1) out.emplace_back("n_paths must be at least 1");
    if (!(cfg.x0 >= 0.0)) out.emplace_back("x0 must be nonnegative");
    return out;
}

std::vector<double> payout_levels(const Solution& s) {
    std::vector<double> out(s.regimes);
    for (std::size_t l = 0; l < s.regimes; ++l)
        out[l] = s.barrier[l] ? std::max(0.0, *s.barrier[l] - s.grid.h()) : s.grid.cap();
    return out;
}

namespace {

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct PathResult {
    double payoff = 0.0;
    bool ruined = false;
};

// Policy and coefficients flattened per (state, regime), read-only during simulation.
struct SimTables {
    std::size_t regimes = 0;
    double inv_h = 0.0;
    std::size_t top = 0;
    std::vector<double> u, drift, vol;
    std::vector<double> drift_step;                // drift * dt_sim
    std::vector<double> vol_step;                  // vol * sqrt(dt_sim)
    bool constant_weight = false;
    double weight = 0.0;
    std::vector<double> level;
    std::vector<double> hold_rate;                 // -q_ll
    std::vector<std::vector<double>> jump_cdf;     // cumulative q_li / -q_ll over targets
    bool running = false;

    std::size_t at(double x) const noexcept {
        if (!(x > 0.0)) return 0;
        const auto k = static_cast<std::size_t>(x * inv_h + 0.5);
        return k < top ? k : top;
    }
};

SimTables build_tables(const ModelSpec& model, const Solution& s, double dt_sim) {
    SimTables t;
    const std::size_t m = s.regimes;
    const std::size_t n = s.grid.size();
    t.regimes = m;
    t.inv_h = 1.0 / s.grid.h();
    t.top = s.grid.reflecting_index();
    t.level = payout_levels(s);
    t.u.assign(n * m, 0.0);
    t.drift.assign(n * m, 0.0);
    t.vol.assign(n * m, 0.0);
    t.drift_step.assign(n * m, 0.0);
    t.vol_step.assign(n * m, 0.0);
    t.running = has_running_reward(model.payoff);
    if (const auto* c = std::get_if<ConstantWeight>(&model.payoff.dividend)) {
        t.constant_weight = true;
        t.weight = c->value;
    }

    for (std::size_t l = 0; l < m; ++l) {
        // Singular states take the retention of the nearest regular state below (else above).
        auto regular_u = [&](std::size_t k) -> std::optional<double> {
            if (s.grid.is_interior(k) && s.action_at(k, l) == Action::Regular) return s.u_at(k, l);
            return std::nullopt;
        };
        std::optional<double> first_regular;
        for (std::size_t k = 1; k <= s.grid.cap_index() && !first_regular; ++k) first_regular = regular_u(k);
        const double fallback = first_regular.value_or(s.controls.empty() ? 0.0 : s.controls.front());

        double last = fallback;
        for (std::size_t k = 0; k < n; ++k) {
            if (auto u = regular_u(k)) last = *u;
            const double u = last;
            const Coefficients c = drift_vol(model, l, u);
            t.u[k * m + l] = u;
            t.drift[k * m + l] = c.drift;
            t.vol[k * m + l] = c.vol;
            t.drift_step[k * m + l] = c.drift * dt_sim;
            t.vol_step[k * m + l] = c.vol * std::sqrt(dt_sim);
        }

        const auto& row = model.regimes.q[l];
        t.hold_rate.push_back(-row[l]);
        std::vector<double> cdf(m, 0.0);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (i != l && -row[l] > 0.0) acc += row[i] / -row[l];
            cdf[i] = acc;
        }
        t.jump_cdf.push_back(std::move(cdf));
    }
    return t;
}

template <class Engine>
std::size_t draw_target(const SimTables& t, std::size_t l, Engine& rng) {
    const auto& cdf = t.jump_cdf[l];
    std::size_t candidates = 0, only = l;
    for (std::size_t i = 0; i < t.regimes; ++i) {
        const double p = cdf[i] - (i == 0 ? 0.0 : cdf[i - 1]);
        if (i != l && p > 0.0) {
            ++candidates;
            only = i;
        }
    }
    if (candidates <= 1) return only;
    const double v = boost::random::uniform_01<double>()(rng) * cdf.back();
    for (std::size_t i = 0; i < t.regimes; ++i)
        if (i != l && v < cdf[i]) return i;
    return only;
}

// Paths interleaved per block; enough independent work to hide the per-step latency chain.
constexpr std::size_t kLanes = 4;
constexpr std::size_t kBatch = 1024;

// One simulated path. Every lane owns its generator and performs the same
// sequence of floating-point operations whether it runs alone or interleaved.
struct Lane {
    boost::random::mt19937_64 rng;
    boost::random::normal_distribution<double> normal;
    double x = 0.0;
    std::size_t l = 0;
    double segment_start = 0.0;  // time at the start of the current run of full steps
    std::size_t full = 0;         // full steps in the current run
    std::size_t left = 0;         // full steps still to take
    double next_switch = 0.0;
    double discount = 1.0;
    double paid = 0.0;    // discounted payout under a constant weight, before scaling by it
    double payoff = 0.0;  // everything else
    bool done = false;
    bool ruined = false;
};

class PathSimulator {
public:
    PathSimulator(const ModelSpec& model, const SimTables& t, const SimConfig& cfg)
        : model_(model), t_(t), cfg_(cfg), step_discount_(std::exp(-model.payoff.r * cfg.dt_sim)),
          fast_(t.constant_weight && !t.running) {}

    void start(Lane& a, std::uint64_t path) const {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                          static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
        a.rng.seed(seq);
        a.normal.reset();
        a.x = cfg_.x0;
        a.l = cfg_.regime0;
        a.discount = 1.0;
        a.paid = a.payoff = 0.0;
        a.done = a.ruined = false;
        pay_excess(a);
        if (!(a.x > 0.0)) {
            a.ruined = a.done = true;
            return;
        }
        a.next_switch = holding(a);
        begin_run(a, 0.0);
    }

    PathResult result(const Lane& a) const { return {a.payoff + t_.weight * a.paid, a.ruined}; }

    // Takes the remaining full steps of every lane's run in lockstep, handling
    // switches as lanes reach them, until all lanes are done.
    void run(std::span<Lane> lanes) const {
        for (;;) {
            std::size_t n = std::numeric_limits<std::size_t>::max();
            for (const Lane& a : lanes)
                if (!a.done) n = std::min(n, a.left);
            if (n == std::numeric_limits<std::size_t>::max()) return;
            if (fast_) {
                // Draw each lane's normals in batches, then advance all lanes together.
                std::array<std::array<double, kBatch>, kLanes> z;
                for (std::size_t s0 = 0; s0 < n; s0 += kBatch) {
                    const std::size_t c = std::min(kBatch, n - s0);
                    for (std::size_t j = 0; j < lanes.size(); ++j)
                        if (!lanes[j].done)
                            for (std::size_t s = 0; s < c; ++s) z[j][s] = lanes[j].normal(lanes[j].rng);
                    for (std::size_t s = 0; s < c; ++s)
                        for (std::size_t j = 0; j < lanes.size(); ++j)
                            if (!lanes[j].done) fast_step(lanes[j], z[j][s]);
                }
            } else {
                for (Lane& a : lanes)
                    for (std::size_t s = 0; s < n && !a.done; ++s) step(a);
            }
            for (Lane& a : lanes) {
                if (a.done) continue;
                a.left -= n;
                if (a.left == 0) end_run(a);
            }
        }
    }

private:
    std::size_t cell(const Lane& a) const { return t_.at(a.x) * t_.regimes + a.l; }

    double holding(Lane& a) const {
        const double rate = t_.hold_rate[a.l];
        if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
        return boost::random::exponential_distribution<double>(rate)(a.rng);
    }

    void pay_excess(Lane& a) const {
        const double level = t_.level[a.l];
        if (a.x > level) {
            if (t_.constant_weight)
                a.paid += a.discount * (a.x - level);
            else
                a.payoff += a.discount * dividend_weight_integral(model_.payoff, level, a.x, a.l);
            a.x = level;
        }
    }

    void ruin(Lane& a) const { a.ruined = a.done = true; }

    // The surplus sits near the payout level, so the payout is branch-free here.
    void fast_step(Lane& a, double z) const {
        const std::size_t i = cell(a);
        a.x += t_.drift_step[i] + t_.vol_step[i] * z;
        a.discount *= step_discount_;
        if (a.x <= 0.0) return ruin(a);
        const double level = t_.level[a.l];
        a.paid += a.discount * std::max(a.x - level, 0.0);
        a.x = std::min(a.x, level);
    }

    void step(Lane& a) const {
        const std::size_t i = cell(a);
        if (t_.running) a.payoff += a.discount * running_reward(model_.payoff, a.x, a.l, t_.u[i]) * cfg_.dt_sim;
        a.x += t_.drift_step[i] + t_.vol_step[i] * a.normal(a.rng);
        a.discount *= step_discount_;
        if (a.x <= 0.0) return ruin(a);
        pay_excess(a);
    }

    void begin_run(Lane& a, double time) const {
        const double stop = std::min(a.next_switch, cfg_.t_max);
        a.segment_start = time;
        a.full = static_cast<std::size_t>(std::max(0.0, std::floor((stop - time) / cfg_.dt_sim)));
        a.left = a.full;
        if (a.full == 0) end_run(a);
    }

    // Partial step that lands exactly on the switch time (or the horizon), then the switch.
    void end_run(Lane& a) const {
        const double time = a.segment_start + static_cast<double>(a.full) * cfg_.dt_sim;
        const double stop = std::min(a.next_switch, cfg_.t_max);
        const double h = stop - time;
        if (h > 0.0) {
            const std::size_t i = cell(a);
            if (t_.running) a.payoff += a.discount * running_reward(model_.payoff, a.x, a.l, t_.u[i]) * h;
            a.x += t_.drift[i] * h + t_.vol[i] * std::sqrt(h) * a.normal(a.rng);
            a.discount *= std::exp(-model_.payoff.r * h);
            if (a.x <= 0.0) return ruin(a);
        }
        if (stop >= cfg_.t_max) {
            a.done = true;
            return;
        }
        a.l = draw_target(t_, a.l, a.rng);
        a.next_switch = stop + holding(a);
        pay_excess(a);
        begin_run(a, stop);
    }

    const ModelSpec& model_;
    const SimTables& t_;
    const SimConfig& cfg_;
    double step_discount_;
    bool fast_;
};


}  // namespace

McEstimate simulate_payoff(const ModelSpec& model, const Solution& solution, const SimConfig& cfg) {
    if (solution.iterations == 0 || solution.regimes != model.regimes.count() ||
        solution.value.size() != solution.grid.size() * solution.regimes)
        throw Error(ErrorCode::MissingPolicy, "simulation needs a solved policy for this model");
    if (cfg.regime0 >= model.regimes.count()) throw Error(ErrorCode::BadRegime, "initial regime out of range");
    if (auto bad = validate(cfg, solution.grid, model.payoff.r); !bad.empty())
        throw Error(ErrorCode::InvalidArgument, bad.front());

    const SimTables tables = build_tables(model, solution, cfg.dt_sim);
    std::vector<double> payoffs(cfg.n_paths);
    std::vector<unsigned char> ruined(cfg.n_paths);

    const PathSimulator sim(model, tables, cfg);
    auto run_block = [&](std::size_t begin, std::size_t end) {
        std::array<Lane, kLanes> lanes;
        for (std::size_t p = begin; p < end; p += kLanes) {
            const std::size_t n = std::min(kLanes, end - p);
            for (std::size_t j = 0; j < n; ++j) sim.start(lanes[j], p + j);
            sim.run(std::span<Lane>(lanes.data(), n));
            for (std::size_t j = 0; j < n; ++j) {
                const PathResult r = sim.result(lanes[j]);
                payoffs[p + j] = r.payoff;
                ruined[p + j] = r.ruined ? 1 : 0;
            }
        }
    };

    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.n_paths));
    if (threads <= 1) {
        run_block(0, cfg.n_paths);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (cfg.n_paths + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t begin = std::min(cfg.n_paths, w * chunk);
            const std::size_t end = std::min(cfg.n_paths, begin + chunk);
            pool.emplace_back(run_block, begin, end);
        }
    }

    McEstimate est;
    est.n_paths = cfg.n_paths;
    const auto n = static_cast<double>(cfg.n_paths);
    est.mean = pairwise_sum(payoffs) / n;
    if (cfg.n_paths > 1) {
        std::vector<double> sq(cfg.n_paths);
        for (std::size_t p = 0; p < cfg.n_paths; ++p) sq[p] = (payoffs[p] - est.mean) * (payoffs[p] - est.mean);
        est.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0)) / std::sqrt(n);
    }
    std::size_t ruins = 0;
    for (unsigned char r : ruined) ruins += r;
    est.ruin_fraction = static_cast<double>(ruins) / n;
    return est;
}

CharacteristicRoots oracle_roots(double mu, double sigma, double r) {
    if (!(sigma > 0.0)) throw Error(ErrorCode::OracleUndefined, "barrier oracle needs sigma > 0");
    if (!(r > 0.0)) throw Error(ErrorCode::OracleUndefined, "barrier oracle needs r > 0");
    const double s2 = sigma * sigma;
    const double disc = std::sqrt(mu * mu + 2.0 * s2 * r);
    return {(-mu + disc) / s2, (-mu - disc) / s2};
}

double oracle_barrier_value(double mu, double sigma, double r, double x, double b) {
    if (!(x >= 0.0)) throw Error(ErrorCode::BadState, "oracle needs x >= 0");
    const CharacteristicRoots th = oracle_roots(mu, sigma, r);
    auto g = [&](double y) { return std::exp(th.plus * y) - std::exp(th.minus * y); };
    const double g_prime_b = th.plus * std::exp(th.plus * b) - th.minus * std::exp(th.minus * b);
    if (x <= b) return g(x) / g_prime_b;
    return g(b) / g_prime_b + (x - b);
}

double oracle_optimal_barrier(double mu, double sigma, double r) {
    const CharacteristicRoots th = oracle_roots(mu, sigma, r);
    const double b = std::log((th.minus * th.minus) / (th.plus * th.plus)) / (th.plus - th.minus);
    return std::max(b, 0.0);
}

}  // namespace divctl
