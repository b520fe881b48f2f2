#include <doctest.h>

#include <cmath>

#include "divctl/model.hpp"
#include "fixtures.hpp"

using namespace divctl;
using doctest::Approx;

TEST_CASE("truncated moments: closed forms") {
    const Moments zero = truncated_moments(ExponentialClaim{1.0}, 0.0);
    CHECK(zero.first == 0.0);
    CHECK(zero.second == 0.0);

    const Moments uni = truncated_moments(UniformClaim{0.0, 1.0}, 1.0);
    CHECK(uni.first == Approx(0.5).epsilon(1e-14));
    CHECK(uni.second == Approx(1.0 / 3.0).epsilon(1e-14));

    const Moments e = truncated_moments(ExponentialClaim{1.0}, 1.0);
    CHECK(std::abs(e.first - 0.6321206) < 1e-7);
    CHECK(std::abs(e.second - 0.5284822) < 1e-7);
}

TEST_CASE("truncated moments: bounds m1 <= u and m2 <= 2 u m1") {
    for (double u : {0.01, 0.3, 1.0, 4.0, 10.0}) {
        for (const ClaimDistribution& d :
             {ClaimDistribution{ExponentialClaim{1.0}}, ClaimDistribution{ExponentialClaim{3.0}},
              ClaimDistribution{UniformClaim{0.0, 1.0}}, ClaimDistribution{UniformClaim{0.5, 2.0}}}) {
            const double uu = std::min(u, support_upper(d));
            const Moments mo = truncated_moments(d, uu);
            CHECK(mo.first <= uu + 1e-15);
            CHECK(mo.second <= 2.0 * uu * mo.first + 1e-15);
        }
    }
}

TEST_CASE("truncated moments: uniform on [lo, hi] matches direct integration") {
    // S(x) = 1 on [0, lo], (hi - x)/(hi - lo) on [lo, hi].
    const double lo = 0.5, hi = 2.0, u = 1.5;
    const double m1 = lo + (hi * (u - lo) - 0.5 * (u * u - lo * lo)) / (hi - lo);
    const double m2 = lo * lo + (hi * (u * u - lo * lo) - 2.0 / 3.0 * (u * u * u - lo * lo * lo)) / (hi - lo);
    const Moments mo = truncated_moments(UniformClaim{lo, hi}, u);
    CHECK(mo.first == Approx(m1).epsilon(1e-13));
    CHECK(mo.second == Approx(m2).epsilon(1e-13));
}

TEST_CASE("tabulated survival reproduces the exponential moments") {
    TabulatedClaim t;
    for (int i = 0; i <= 8000; ++i) {
        t.x.push_back(i * 0.001);
        t.survival.push_back(std::exp(-i * 0.001));
    }
    for (double u : {0.25, 1.0, 2.5}) {
        const Moments tab = truncated_moments(t, u);
        const Moments ref = truncated_moments(ExponentialClaim{1.0}, u);
        CHECK(std::abs(tab.first - ref.first) <= 1e-6);
        CHECK(std::abs(tab.second - ref.second) <= 1e-6);
    }
    CHECK_THROWS_AS(truncated_moments(t, 9.0), Error);
    try {
        truncated_moments(t, 9.0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfSupport);
    }
}

TEST_CASE("full moments") {
    const Moments e = full_moments(ExponentialClaim{2.0});
    CHECK(e.first == Approx(0.5));
    CHECK(e.second == Approx(0.5));
    const Moments u = full_moments(UniformClaim{0.0, 1.0});
    CHECK(u.first == Approx(0.5));
    CHECK(u.second == Approx(1.0 / 3.0));
}

TEST_CASE("drift and volatility") {
    ModelSpec m = fixtures::prop_exp();
    const Coefficients p = drift_vol(m, 0, 1.0);
    CHECK(p.drift == Approx(1.0));
    CHECK(p.vol == Approx(std::sqrt(2.0)));

    const Coefficients p2 = drift_vol(m, 1, 0.5);
    CHECK(p2.drift == Approx(5.0));
    CHECK(p2.vol == Approx(0.5 * std::sqrt(20.0)));

    m.reinsurance = Reinsurance::ExcessOfLoss;
    const Coefficients x = drift_vol(m, 0, 1.0);
    CHECK(x.drift == Approx(1.0 - std::exp(-1.0)));
    CHECK(x.vol == Approx(std::sqrt(2.0 * (1.0 - 2.0 * std::exp(-1.0)))));

    // Retention beyond the claim support behaves like full retention.
    m.claim = UniformClaim{0.0, 1.0};
    const Coefficients capped = drift_vol(m, 0, 3.0);
    CHECK(capped.drift == Approx(0.5));
    CHECK(capped.variance() == Approx(1.0 / 3.0));

    // u = 0 cedes everything.
    const Coefficients none = drift_vol(m, 1, 0.0);
    CHECK(none.drift == 0.0);
    CHECK(none.vol == 0.0);
}

TEST_CASE("dividend weights") {
    PayoffSpec p;
    p.dividend = ExpMarginalWeight{1.0};
    CHECK(dividend_weight(p, 0.0, 0) == 1.0);
    CHECK(dividend_weight(p, 1.0, 1) == Approx(0.3678794).epsilon(1e-7));
    CHECK_THROWS_AS(dividend_weight(p, -0.1, 0), Error);
    CHECK(dividend_weight_integral(p, 1.0, 3.0, 0) == Approx(std::exp(-1.0) - std::exp(-3.0)));
    CHECK(dividend_weight_integral(p, 2.0, 2.0, 0) == 0.0);

    p.dividend = ConstantWeight{2.5};
    CHECK(dividend_weight(p, 7.0, 0) == 2.5);
    CHECK(dividend_weight_integral(p, 1.0, 3.0, 0) == Approx(5.0));
}

TEST_CASE("tabulated running reward interpolates and clamps") {
    PayoffSpec p;
    CHECK_FALSE(has_running_reward(p));
    TabulatedReward t;
    t.x = {0.0, 2.0};
    t.u = {0.0, 1.0};
    t.values = {{{0.0, 1.0}, {2.0, 3.0}}};
    p.running = t;
    CHECK(has_running_reward(p));
    CHECK(running_reward(p, 1.0, 0, 0.5) == Approx(1.5));
    CHECK(running_reward(p, 5.0, 0, 2.0) == Approx(3.0));
    CHECK(running_reward(p, 0.0, 0, 0.0) == 0.0);
}

TEST_CASE("control mesh") {
    const ControlSet c{0.0, 1.0, 101};
    const auto mesh = c.mesh();
    REQUIRE(mesh.size() == 101);
    CHECK(mesh.front() == 0.0);
    CHECK(mesh.back() == 1.0);
    CHECK(mesh[37] == Approx(0.37).epsilon(1e-15));
}

TEST_CASE("validate accepts the worked examples") {
    CHECK(validate(fixtures::prop_exp()).empty());
    CHECK(validate(fixtures::two_regime(Reinsurance::ExcessOfLoss, UniformClaim{0.0, 1.0})).empty());
    CHECK(validate(fixtures::single_regime()).empty());
}

TEST_CASE("validate reports each broken invariant") {
    ModelSpec m = fixtures::prop_exp();
    m.regimes.q = {{-0.5, 0.4}, {0.5, -0.5}};
    auto v = validate(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "regimes.q[0]");
    CHECK(v[0].message == "generator row 0 sums to -0.1");

    m = fixtures::prop_exp();
    m.regimes.q = {{0.5, -0.5}, {0.5, -0.5}};
    CHECK_FALSE(validate(m).empty());

    m = fixtures::prop_exp();
    m.regimes.beta = {1.0, -2.0};
    m.payoff.r = 0.0;
    m.control.n_u = 1;
    v = validate(m);
    CHECK(v.size() == 3);

    m = fixtures::prop_exp();
    m.claim = UniformClaim{1.0, 1.0};
    CHECK(validate(m).front().field == "claim");

    m = fixtures::prop_exp();
    m.payoff.dividend = ExpMarginalWeight{0.0};
    CHECK(validate(m).front().field == "payoff.dividend");

    m = fixtures::prop_exp();
    m.claim = TabulatedClaim{{0.0, 1.0, 0.5}, {1.0, 0.5, 0.0}};
    CHECK(validate(m).front().field == "claim.x");

    m = fixtures::prop_exp();
    m.claim = TabulatedClaim{{0.0, 1.0, 2.0}, {1.0, 0.2, 0.5}};
    CHECK(validate(m).front().field == "claim.survival");
}

TEST_CASE("error codes have stable names") {
    CHECK(to_string(ErrorCode::DegenerateKernel) == std::string("degenerate-kernel"));
    CHECK(to_string(ErrorCode::MissingPolicy) == std::string("missing-policy"));
}
