#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "fracuc/fracops.hpp"
#include "fracuc/ssmodel.hpp"

namespace fracuc {

/**
 * @brief Univariate moving-average form of an aggregate h(L_d) eta_t + h~(L_d) eps_t.
 *
 * g and g~ are the standard-lag weights of the two channels, c the standard-lag
 * weights of the aggregate on a single shock u with variance sigma_u2, and psi
 * the weights of the same aggregate as a polynomial in L_d.
 */
struct ReducedForm {
    double d = 0.0;
    CoeffSeq g, g_tilde;
    CoeffSeq c_std;      // c_0 = 1, positive roots
    CoeffSeq psi;        // psi_0 = 1
    double sigma_u2 = 0.0;
};

/**
 * Aggregates two MA polynomials in the fractional lag operator. c_l solves
 * c_l^2 sigma_u2 = g_l^2 s_eta2 + g~_l^2 s_eps2 + 2 g_l g~_l s_eta_eps with the
 * positive root, and psi_l = (c_l - sum_{k<l} varsigma_{k,l} psi_k) / varsigma_{l,l}.
 * Computed in PreciseReal and rounded.
 */
[[nodiscard]] ReducedForm aggregate_ma(std::span<const double> h, std::span<const double> h_tilde,
                                       const Eigen::Matrix2d& Q, double d, std::size_t n);

/// Working precision of the aggregation; the psi recursion divides by d^l.
using PreciseReal = boost::multiprecision::cpp_bin_float_100;

/// aggregate_ma carried out and returned in PreciseReal, with the L_d powers it used.
struct PreciseReducedForm {
    double d = 0.0;
    std::vector<PreciseReal> g, g_tilde, c_std, psi;
    std::vector<std::vector<PreciseReal>> varsigma;  // row k-1: L_d^k in the standard lag
    PreciseReal sigma_u2;
};

[[nodiscard]] PreciseReducedForm aggregate_ma_precise(std::span<const double> h,
                                                      std::span<const double> h_tilde,
                                                      const Eigen::Matrix2d& Q, double d,
                                                      std::size_t n);

/// Reduced form of phi(L_d) eta_t + (1 - L_d) eps_t at theta, over spec.n lags.
[[nodiscard]] ReducedForm reduced_psi(const Params& theta, const ModelSpec& spec);

/// Standard-lag weights (g, g~) of z_t = phi(L_d) Delta^d (y_t - det_t) on eta and eps.
struct ReducedWeights {
    CoeffSeq g, g_tilde;
};
[[nodiscard]] ReducedWeights reduced_weights(double d, std::span<const double> phi, std::size_t n);

/**
 * @brief gamma_0..gamma_J of z_t at t = n, the last observation.
 *
 * gamma_j = sum_{l=j}^{n-1} [g_l g_{l-j} s_eta2 + g~_l g~_{l-j} s_eps2
 *           + (g_l g~_{l-j} + g~_l g_{l-j}) s_eta_eps].
 * For p <= 2 the weights come from pi(d) and pi(2d) directly; otherwise from
 * the powers of L_d.
 */
[[nodiscard]] std::vector<double> autocov_reduced(const Params& theta, std::size_t J, std::size_t n);

/// Same quantity computed through the powers of L_d for any p.
[[nodiscard]] std::vector<double> autocov_reduced_general(const Params& theta, std::size_t J,
                                                          std::size_t n);

struct VarianceTriple {
    double sigma_eta2 = 0.0;
    double sigma_eta_eps = 0.0;
    double sigma_eps2 = 0.0;
};

/// Coefficients of (s_eta2, s_eps2, s_eta_eps) in gamma_0..gamma_2, one row per lag.
[[nodiscard]] Eigen::Matrix3d identification_matrix(double d, std::span<const double> phi,
                                                    std::size_t n);

/**
 * Recovers the variance triple from gamma_0..gamma_2. Throws NumericalError
 * when the 3x3 system has condition number above max_cond, which flags the
 * non-identified case d = 1 with p < 2.
 */
[[nodiscard]] VarianceTriple identify_sigmas(std::span<const double> gamma, double d,
                                             std::span<const double> phi, std::size_t n,
                                             double max_cond = 1e10);

struct BnDecomposition {
    std::vector<double> trend, cycle;
};

/**
 * @brief Fractional Beveridge-Nelson split of Delta^d z_t = theta(L_d) u_t
 * for a finite polynomial theta in L_d:
 *
 *   trend_t = theta(1) Delta^{-d} u_t,
 *   cycle_t = -sum_{k=0}^{t-1} theta*_k L_d^k u_t,   theta*_k = sum_{j>k} theta_j.
 */
[[nodiscard]] BnDecomposition bn_decompose(std::span<const double> u, std::span<const double> theta,
                                           double d);

/**
 * Structural form of the same split, with the two shocks kept apart:
 * Delta^d (y - det) = eta_t + theta^eps(L_d) eps_t with
 * theta^eps(z) = (1 - z) / phi(z), whose long-run value is zero.
 */
[[nodiscard]] BnDecomposition bn_decompose(std::span<const double> eta, std::span<const double> eps,
                                           const Params& theta);

enum class GphInput {
    Levels,       // regression on the series itself
    Differenced,  // regression on the first difference, estimate shifted by one
};

struct GphResult {
    double d_hat = 0.0;
    double se = 0.0;          // OLS standard error of the slope
    double se_asymptotic = 0.0;  // pi / sqrt(24 m)
    std::size_t m = 0;        // Fourier frequencies used
    GphInput input = GphInput::Differenced;
};

/// Log-periodogram regression on the first floor(n^alpha) Fourier frequencies.
[[nodiscard]] GphResult gph_estimate(std::span<const double> y, double alpha = 0.65,
                                     GphInput input = GphInput::Differenced);

}  // namespace fracuc
