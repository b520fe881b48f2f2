#include "divctl/chain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace divctl {

Grid Grid::make(double h, double cap) {
    if (!(h > 0.0) || !(cap > 0.0))
        throw Error(ErrorCode::InvalidArgument, "grid needs h > 0 and B > 0");
    const double ratio = cap / h;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
        throw Error(ErrorCode::InvalidArgument,
                    "B = " + std::to_string(cap) + " is not an integer multiple of h = " + std::to_string(h));
    return Grid(h, static_cast<std::size_t>(n));
}

std::size_t Grid::nearest(double x) const noexcept {
    if (!(x > 0.0)) return 0;
    const double k = std::round(x / h_);
    if (k >= static_cast<double>(reflecting_index())) return reflecting_index();
    return static_cast<std::size_t>(k);
}

double TransitionKernel::total() const noexcept {
    double s = p_up + p_down;
    for (double p : p_switch) s += p;
    return s;
}

double TransitionKernel::discount(Discounting mode) const noexcept {
    if (mode == Discounting::Exponential) return std::exp(-r * dt);
    return 1.0 - r * dt;
}

TransitionKernel kernel_from_coefficients(const Coefficients& coef, double h, double r,
                                          std::span<const double> generator_row, std::size_t regime) {
    if (regime >= generator_row.size())
        throw Error(ErrorCode::BadRegime, "regime index " + std::to_string(regime) + " out of range");

    const double b = coef.drift;
    const double s2 = coef.variance();
    const double h2 = h * h;

    TransitionKernel k;
    k.r = r;
    k.normalizer = s2 + h * std::abs(b) + h2 * (r - generator_row[regime]);
    const double denom = k.normalizer - r * h2;
    if (!(denom > 0.0))
        throw Error(ErrorCode::DegenerateKernel, "no diffusion, drift or switching at this state");

    k.p_up = (0.5 * s2 + h * std::max(b, 0.0)) / denom;
    k.p_down = (0.5 * s2 + h * std::max(-b, 0.0)) / denom;
    k.p_switch.assign(generator_row.size(), 0.0);
    for (std::size_t i = 0; i < generator_row.size(); ++i)
        if (i != regime) k.p_switch[i] = h2 * generator_row[i] / denom;
    k.dt = h2 / k.normalizer;
    return k;
}

TransitionKernel regular_kernel(const ModelSpec& model, const Grid& grid, std::size_t k,
                                std::size_t regime, double u) {
    if (!grid.is_interior(k))
        throw Error(ErrorCode::BadState, "state " + std::to_string(k) + " is not interior");
    const auto& ctl = model.control;
    if (u < ctl.u_min || u > ctl.u_max)
        throw Error(ErrorCode::InvalidRetention, "retention outside the control set");
    const Coefficients coef = drift_vol(model, regime, u);
    return kernel_from_coefficients(coef, grid.h(), model.payoff.r, model.regimes.q[regime], regime);
}

InstantStep singular_step(const Grid& grid, std::size_t k, std::size_t /*regime*/) {
    if (k == 0) throw Error(ErrorCode::CannotPayAtRuin, "no dividend can be paid at the ruin state");
    if (k >= grid.size()) throw Error(ErrorCode::BadState, "state index out of range");
    return {k - 1, grid.h()};
}

InstantStep reflect(const Grid& grid, std::size_t k, std::size_t /*regime*/) {
    if (k != grid.reflecting_index())
        throw Error(ErrorCode::NotAtReflectingBoundary,
                    "reflection only applies at B+h (state " + std::to_string(grid.reflecting_index()) + ")");
    return {grid.cap_index(), grid.h()};
}

ConsistencyError local_consistency(const Coefficients& coef, const TransitionKernel& kernel, double h) {
    // Regime switches leave the surplus in place, so only the up/down moves contribute.
    const double mean = h * (kernel.p_up - kernel.p_down);
    const double second = h * h * (kernel.p_up + kernel.p_down);
    const double var = second - mean * mean;
    return {std::abs(mean - coef.drift * kernel.dt), std::abs(var - coef.variance() * kernel.dt)};
}

ConsistencyError check_local_consistency(const ModelSpec& model, const Grid& grid, std::size_t k,
                                         std::size_t regime, double u) {
    const TransitionKernel kernel = regular_kernel(model, grid, k, regime, u);
    return local_consistency(drift_vol(model, regime, u), kernel, grid.h());
}

KernelTable::KernelTable(const ModelSpec& model, const Grid& grid, std::vector<double> controls,
                         Discounting discounting)
    : regimes_(model.regimes.count()), controls_(std::move(controls)) {
    const std::size_t n = controls_.size();
    kernels_.reserve(regimes_ * n);
    coefs_.reserve(regimes_ * n);
    up_.resize(regimes_ * n);
    down_.resize(regimes_ * n);
    dt_.resize(regimes_ * n);
    switch_.assign(regimes_ * regimes_ * n, 0.0);

    for (std::size_t l = 0; l < regimes_; ++l) {
        for (std::size_t c = 0; c < n; ++c) {
            const Coefficients coef = drift_vol(model, l, controls_[c]);
            TransitionKernel k =
                kernel_from_coefficients(coef, grid.h(), model.payoff.r, model.regimes.q[l], l);
            const double disc = k.discount(discounting);
            up_[l * n + c] = disc * k.p_up;
            down_[l * n + c] = disc * k.p_down;
            dt_[l * n + c] = k.dt;
            for (std::size_t i = 0; i < regimes_; ++i)
                switch_[(l * regimes_ + i) * n + c] = disc * k.p_switch[i];
            coefs_.push_back(coef);
            kernels_.push_back(std::move(k));
        }
    }
}

}  // namespace divctl
