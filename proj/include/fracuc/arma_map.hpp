#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fracuc/error.hpp"
#include "fracuc/fracops.hpp"

namespace fracuc {

/**
 * @brief ARMA(v, w) approximation of the fractional integration filter (1-L)^{-d}.
 *
 * The approximating filter is a(L)^{-1} m(L) with a(L) = 1 - a_1 L - ... - a_v L^v
 * and m(L) = 1 + m_1 L + ... + m_w L^w, so its Wold weights obey
 * b_j = sum_k a_k b_{j-k} + m_j with b_0 = 1.
 */
struct ArmaApprox {
    double d = 0.0;
    std::vector<double> ar;  // a_1..a_v
    std::vector<double> ma;  // m_1..m_w
    double fit_mse = 0.0;    // mean over j < n of (phi_j(d) - b_j)^2
    std::size_t n = 0;
};

/// Raised when the ARMA fit does not settle within its retry budget.
class ArmaFitError : public NumericalError {
public:
    ArmaFitError(const std::string& what, ArmaApprox best)
        : NumericalError(what), best_(std::move(best)) {}
    [[nodiscard]] const ArmaApprox& best() const noexcept { return best_; }

private:
    ArmaApprox best_;
};

/// Truncated Wold weights b_0..b_{n-1} of a(L)^{-1} m(L).
[[nodiscard]] CoeffSeq arma_wold(std::span<const double> ar, std::span<const double> ma,
                                 std::size_t n);

/// Mean squared distance between the Wold weights of (ar, ma) and phi_j(d), j < n.
[[nodiscard]] double arma_fit_error(double d, std::span<const double> ar,
                                    std::span<const double> ma, std::size_t n);

/// Exact AR representation of (1-L)^{-k} for integer k <= v, padded to (v, w).
[[nodiscard]] ArmaApprox exact_integer_arma(int k, std::size_t v, std::size_t w, std::size_t n);

struct ArmaFitOptions {
    std::size_t max_restarts = 12;     // LM attempts per starting point
    std::size_t evals_per_run = 40000; // simplex budget between LM attempts
};

/**
 * @brief Least-squares fit of the ARMA(v, w) Wold weights to phi_j(d), j < n.
 *
 * Levenberg-Marquardt with the analytic Jacobian of the Wold recursion; a
 * simplex run reshuffles the point whenever LM exhausts its budget. Starting
 * points are zero, a linearised Prony solution, the exact integer
 * representations of floor(d) and ceil(d) when available, and `warm` if given.
 * The best converged candidate wins.
 */
[[nodiscard]] ArmaApprox fit_arma_approx(double d, std::size_t v, std::size_t w, std::size_t n,
                                         const ArmaApprox* warm = nullptr,
                                         const ArmaFitOptions& opts = {});

/// Natural cubic spline through (x_i, y_i) with strictly increasing x.
class NaturalCubicSpline {
public:
    NaturalCubicSpline() = default;
    NaturalCubicSpline(std::vector<double> x, std::vector<double> y);
    [[nodiscard]] double operator()(double t) const;

private:
    std::vector<double> x_, y_, m_;  // m_ = second derivatives at the knots
};

/**
 * @brief Smooth map d -> ARMA coefficients obtained by fitting on a grid of d
 * and splining every coefficient across the grid. Immutable once built.
 *
 * Knots follow one continuous branch of solutions, so at integer d the stored
 * knot is an exact representation with cancelling factors rather than the
 * minimal one.
 */
class CoeffMap {
public:
    CoeffMap(std::vector<ArmaApprox> knots, std::size_t v, std::size_t w, std::size_t n);

    /// Coefficients at d: the knot itself on the grid, otherwise the spline value
    /// refined by a short least-squares polish. Throws ValidationError outside the grid.
    [[nodiscard]] ArmaApprox evaluate(double d) const;

    /// Raw spline values (ar then ma) without the polish.
    [[nodiscard]] std::vector<double> spline_coefficients(double d) const;

    [[nodiscard]] bool contains(double d) const noexcept {
        return d >= grid_.front() && d <= grid_.back();
    }
    [[nodiscard]] double d_min() const noexcept { return grid_.front(); }
    [[nodiscard]] double d_max() const noexcept { return grid_.back(); }
    [[nodiscard]] std::size_t v() const noexcept { return v_; }
    [[nodiscard]] std::size_t w() const noexcept { return w_; }
    [[nodiscard]] std::size_t horizon() const noexcept { return n_; }
    [[nodiscard]] const std::vector<double>& grid() const noexcept { return grid_; }
    [[nodiscard]] const std::vector<ArmaApprox>& knots() const noexcept { return knots_; }

private:
    std::vector<ArmaApprox> knots_;
    std::vector<double> grid_;
    std::size_t v_, w_, n_;
    std::vector<NaturalCubicSpline> ar_splines_, ma_splines_;
};

/// The default grid 0.50, 0.55, ..., 2.50.
[[nodiscard]] std::vector<double> default_d_grid();

/// Evenly spaced grid from lo to hi inclusive in steps of `step`.
[[nodiscard]] std::vector<double> make_d_grid(double lo, double hi, double step);

/// Fit every grid point (warm-starting from the neighbours) and spline the result.
/// A failing grid point aborts with an ArmaFitError naming its d.
[[nodiscard]] CoeffMap build_coeff_map(const std::vector<double>& d_grid, std::size_t v,
                                       std::size_t w, std::size_t n,
                                       const ArmaFitOptions& opts = {});

}  // namespace fracuc
