#pragma once

#include <string>

#include "divctl/config.hpp"
#include "divctl/model.hpp"

namespace fixtures {

// Two regimes, beta = (1, 10), symmetric switching at rate 1/2, r = 0.05.
inline divctl::ModelSpec two_regime(divctl::Reinsurance type, divctl::ClaimDistribution claim, double u_max = 1.0,
                                    std::size_t n_u = 101) {
    divctl::ModelSpec m;
    m.reinsurance = type;
    m.claim = claim;
    m.regimes.beta = {1.0, 10.0};
    m.regimes.q = {{-0.5, 0.5}, {0.5, -0.5}};
    m.payoff.r = 0.05;
    m.control = {0.0, u_max, n_u};
    return m;
}

inline divctl::ModelSpec prop_exp(std::size_t n_u = 101) {
    return two_regime(divctl::Reinsurance::Proportional, divctl::ExponentialClaim{1.0}, 1.0, n_u);
}

// One regime with mu = 1, sigma^2 = 2 at u = 1.
inline divctl::ModelSpec single_regime() {
    divctl::ModelSpec m;
    m.claim = divctl::ExponentialClaim{1.0};
    m.regimes.beta = {1.0};
    m.regimes.q = {{0.0}};
    m.payoff.r = 0.05;
    m.control = {0.0, 1.0, 2};
    return m;
}

inline std::string preset(const std::string& name) { return std::string(DIVCTL_PRESET_DIR) + "/" + name + ".json"; }

}  // namespace fixtures
