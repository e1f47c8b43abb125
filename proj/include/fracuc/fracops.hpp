#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fracuc {

/// Finite real coefficient sequence indexed from lag 0.
using CoeffSeq = std::vector<double>;

/**
 * @brief Truncated fractional operators on type II (zero pre-sample) series.
 *
 * Notation: the fractional difference (1-L)^d has weights pi_j(d) with
 * pi_0 = 1 and pi_j = (j-d-1)/j * pi_{j-1}; its inverse (1-L)^{-d} has weights
 * phi_j(d) = pi_j(-d). The fractional lag operator is L_d = 1 - (1-L)^d.
 */
namespace fracops {

/// Weights pi_0..pi_{n-1} of the fractional difference (1-L)^d.
[[nodiscard]] CoeffSeq pi_coeffs(double d, std::size_t n);

/// Weights of the fractional integration filter (1-L)^{-d}.
[[nodiscard]] CoeffSeq phi_int_coeffs(double d, std::size_t n);

/// Truncated fractional difference: out_t = sum_{j=0}^{t-1} pi_j(d) z_{t-j}.
/// Negative d integrates.
[[nodiscard]] std::vector<double> fracdiff(std::span<const double> series, double d);

/// Product of two lag polynomials truncated to n terms.
[[nodiscard]] CoeffSeq convolve(std::span<const double> a, std::span<const double> b,
                                std::size_t n);

/// Standard-lag AR weights delta_0..delta_l of phi(L_d) = 1 - sum_k phi_k L_d^k.
/// `phi` holds (1, phi_1, ..., phi_p); only phi[1..] are read.
[[nodiscard]] CoeffSeq frac_ar_expand(double d, std::span<const double> phi, std::size_t l);

/// MA weights omega_0..omega_{n-1} of the inverse of an AR polynomial with delta_0 = 1.
[[nodiscard]] CoeffSeq invert_ar(std::span<const double> delta, std::size_t n);

/// Standard-lag weights of L_d^k, i.e. varsigma_{k,i}(d) for i = 0..n-1.
[[nodiscard]] CoeffSeq varsigma_coeffs(double d, std::size_t k, std::size_t n);

/// All powers L_d^1..L_d^kmax at once; row k-1 holds varsigma_{k,.}(d).
[[nodiscard]] std::vector<CoeffSeq> varsigma_table(double d, std::size_t kmax, std::size_t n);

/// Apply a causal standard-lag filter with zero pre-sample: out_t = sum_j w_j z_{t-j}.
[[nodiscard]] std::vector<double> apply_filter(std::span<const double> weights,
                                               std::span<const double> series);

}  // namespace fracops
}  // namespace fracuc
