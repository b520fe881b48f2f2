#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "divctl/model.hpp"

namespace divctl {

/// Surplus lattice {0, h, ..., B, B+h}. State 0 is absorbing (ruin), B+h reflects back to B.
/// States are addressed by index; x_k is always recomputed as k*h.
class Grid {
public:
    /// Throws InvalidArgument unless h > 0, B > 0 and B is an integer multiple of h.
    static Grid make(double h, double cap);

    double h() const noexcept { return h_; }
    double cap() const noexcept { return static_cast<double>(n_cap_) * h_; }
    double x(std::size_t k) const noexcept { return static_cast<double>(k) * h_; }

    std::size_t size() const noexcept { return n_cap_ + 2; }
    std::size_t cap_index() const noexcept { return n_cap_; }
    std::size_t reflecting_index() const noexcept { return n_cap_ + 1; }
    bool is_interior(std::size_t k) const noexcept { return k >= 1 && k <= n_cap_; }

    /// Nearest lattice index to x, clamped to [0, B+h].
    std::size_t nearest(double x) const noexcept;

private:
    Grid(double h, std::size_t n_cap) : h_(h), n_cap_(n_cap) {}
    double h_;
    std::size_t n_cap_;
};

/// Where the discount of a regular step is applied.
///
/// Linear multiplies the one-step expectation by (D - r h^2) / D = 1 - r dt, which is the
/// exact rearrangement of the upwind finite-difference QVI. Exponential uses exp(-r dt).
/// The two differ by O(dt^2) per step.
enum class Discounting { Linear, Exponential };

/// One regular-control step of the approximating chain from (x, l) under u.
struct TransitionKernel {
    double p_up = 0.0;
    double p_down = 0.0;
    std::vector<double> p_switch;  ///< indexed by target regime, zero at the current regime
    double dt = 0.0;               ///< interpolation interval h^2 / D
    double normalizer = 0.0;       ///< D = sigma^2 + h|b| + h^2 (r - q_ll)
    double r = 0.0;

    double total() const noexcept;
    double discount(Discounting mode) const noexcept;
};

/// Kernel for given coefficients. Throws DegenerateKernel if D - r h^2 <= 0.
TransitionKernel kernel_from_coefficients(const Coefficients& coef, double h, double r,
                                          std::span<const double> generator_row, std::size_t regime);

/// Kernel at interior state k for regime l and retention u.
TransitionKernel regular_kernel(const ModelSpec& model, const Grid& grid, std::size_t k,
                                std::size_t regime, double u);

/// Instantaneous move with its dividend increment (no time elapses, no discounting).
struct InstantStep {
    std::size_t next = 0;
    double dividend = 0.0;
};

/// Pays h from state k >= 1 and moves to k-1. Throws CannotPayAtRuin at k = 0.
InstantStep singular_step(const Grid& grid, std::size_t k, std::size_t regime);

/// Forced move from B+h to B. Throws NotAtReflectingBoundary elsewhere.
InstantStep reflect(const Grid& grid, std::size_t k, std::size_t regime);

struct ConsistencyError {
    double mean = 0.0;      ///< |E[dxi] - b dt|
    double variance = 0.0;  ///< |Var[dxi] - sigma^2 dt|
};

ConsistencyError local_consistency(const Coefficients& coef, const TransitionKernel& kernel, double h);

ConsistencyError check_local_consistency(const ModelSpec& model, const Grid& grid, std::size_t k,
                                         std::size_t regime, double u);

/// All regular-step kernels for a model on a grid, one per (regime, control).
///
/// Built eagerly and immutable afterwards, so it is shared read-only across threads.
/// Besides the raw kernels it holds the discounted weights the solver multiplies with.
class KernelTable {
public:
    KernelTable(const ModelSpec& model, const Grid& grid, std::vector<double> controls,
                Discounting discounting);

    std::size_t regimes() const noexcept { return regimes_; }
    std::size_t control_count() const noexcept { return controls_.size(); }
    const std::vector<double>& controls() const noexcept { return controls_; }

    const TransitionKernel& kernel(std::size_t regime, std::size_t c) const {
        return kernels_[regime * controls_.size() + c];
    }
    const Coefficients& coefficients(std::size_t regime, std::size_t c) const {
        return coefs_[regime * controls_.size() + c];
    }

    // Discounted weights, contiguous over controls.
    std::span<const double> up(std::size_t regime) const { return row(up_, regime); }
    std::span<const double> down(std::size_t regime) const { return row(down_, regime); }
    std::span<const double> to_regime(std::size_t regime, std::size_t target) const {
        return {switch_.data() + (regime * regimes_ + target) * controls_.size(), controls_.size()};
    }
    std::span<const double> dt(std::size_t regime) const { return row(dt_, regime); }

private:
    std::span<const double> row(const std::vector<double>& v, std::size_t regime) const {
        return {v.data() + regime * controls_.size(), controls_.size()};
    }

    std::size_t regimes_;
    std::vector<double> controls_;
    std::vector<TransitionKernel> kernels_;
    std::vector<Coefficients> coefs_;
    std::vector<double> up_, down_, switch_, dt_;
};

}  // namespace divctl
