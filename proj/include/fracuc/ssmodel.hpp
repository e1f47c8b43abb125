#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "fracuc/arma_map.hpp"
#include "fracuc/fracops.hpp"

namespace fracuc {

/**
 * @brief Structural choices of the trend-cycle model
 *
 *   y_t = mu0 + mu1 t [+ mu_break max(0, t - t_b)] + x_t + c_t,
 *   (1-L)^d x_t = eta_t,   phi(L_d) c_t = eps_t,   t = 1..n.
 */
struct ModelSpec {
    std::size_t p = 1;
    bool d_free = true;
    double d_fixed = 1.0;                      // used when !d_free
    bool drift = true;                         // mu1 t term
    std::optional<std::size_t> break_index;    // t_b, 1-based
    std::size_t v = 4, w = 4;                  // ARMA orders of the trend approximation
    std::size_t l = 10;                        // cycle truncation lag
    std::size_t n = 0;                         // sample length

    /// Throws ValidationError on inconsistent settings.
    void validate() const;
    /// Number of deterministic coefficients (mu0, mu1, mu_break).
    [[nodiscard]] std::size_t n_deterministic() const noexcept {
        return 1 + (drift ? 1 : 0) + (break_index ? 1 : 0);
    }
};

/// Structural parameter vector theta.
struct Params {
    double d = 1.0;
    std::vector<double> phi;      // phi_1..phi_p
    double sigma_eta2 = 1.0;
    double sigma_eta_eps = 0.0;
    double sigma_eps2 = 1.0;
    double mu0 = 0.0;
    double mu1 = 0.0;
    std::optional<double> mu_break;

    [[nodiscard]] double rho() const;
    [[nodiscard]] Eigen::Matrix2d Q() const;
};

/// Problems with a parameter point, or an empty string when it is admissible.
[[nodiscard]] std::string params_problem(const Params& theta, const ModelSpec& spec,
                                         const CoeffMap* map = nullptr);

/// Throws ValidationError with the text of params_problem when it is non-empty.
void validate_params(const Params& theta, const ModelSpec& spec, const CoeffMap* map = nullptr);

/**
 * @brief Stationarity of the fractional-lag AR polynomial: no root of phi(z)
 * inside the image of the closed unit disk under z -> 1 - (1-z)^d.
 *
 * Counts the winding of phi(1 - (1 - e^{i lambda})^d) around zero on an evenly
 * spaced boundary sample and also requires it to stay away from zero.
 */
[[nodiscard]] bool cycle_is_stable(double d, std::span<const double> phi,
                                   std::size_t samples = 720);

/// mu0 + mu1 t [+ mu_break max(0, t - t_b)] for t = 1..n.
[[nodiscard]] std::vector<double> deterministic_path(const Params& theta, const ModelSpec& spec);

/**
 * @brief Linear Gaussian state space
 *
 *   y_t = Z alpha_t + 0,   alpha_{t+1} = T_t alpha_t + R zeta_t,   zeta_t ~ N(0, Q),
 *
 * with alpha_1 ~ N(a1, P1). Blocks in order: deterministic (level, slope[, break
 * slope]), trend, cycle. When a break is present the transition out of period t
 * adds the break slope to the level for t >= t_b.
 */
struct StateSpace {
    std::size_t n_mu = 0, n_x = 0, n_c = 0;
    Eigen::SparseMatrix<double, Eigen::RowMajor> T;
    Eigen::MatrixXd R;
    Eigen::RowVectorXd Z;
    Eigen::Matrix2d Q;
    Eigen::VectorXd a1;
    Eigen::MatrixXd P1;
    std::optional<std::size_t> break_index;

    [[nodiscard]] std::size_t dim() const noexcept { return n_mu + n_x + n_c; }
    [[nodiscard]] std::size_t x_offset() const noexcept { return n_mu; }
    [[nodiscard]] std::size_t c_offset() const noexcept { return n_mu + n_x; }
    /// Whether the break slope enters the level on the transition out of period t (1-based).
    [[nodiscard]] bool break_active(std::size_t t) const noexcept {
        return break_index && t >= *break_index;
    }
};

/// True when d is an integer in [1, v], where the trend has an exact AR representation.
[[nodiscard]] bool exact_integer_trend(double d, const ModelSpec& spec) noexcept;

/// ARMA coefficients used for the trend at theta.d: the exact integer representation
/// when d is an integer no larger than v, otherwise the map.
[[nodiscard]] ArmaApprox trend_arma(double d, const ModelSpec& spec, const CoeffMap& map);

/// Truncated system: ARMA(v, w) trend block and an AR(l) cycle block in delta~.
[[nodiscard]] StateSpace build_state_space(const Params& theta, const ModelSpec& spec,
                                           const CoeffMap& map);

/// Exact system: AR(n-1) blocks in -pi_j(d) for the trend and -delta_j for the cycle.
[[nodiscard]] StateSpace build_exact_state_space(const Params& theta, const ModelSpec& spec);

/**
 * @brief Moments of the stochastic part of y under theta.
 *
 * With w_j = (phi_j(d), omega_j) the Wold weights of (x, c) on (eta, eps):
 *   Cov(y_t, y_s) = sum_{k <= min(t,s)} w_{t-k}' Q w_{s-k},
 *   Cov(eta_k, y_s) = phi_{s-k} sigma_eta2 + omega_{s-k} sigma_eta_eps,
 *   Cov(eps_k, y_s) = phi_{s-k} sigma_eta_eps + omega_{s-k} sigma_eps2.
 * Indices are 1-based in the formulas and 0-based in storage.
 */
class CovCache {
public:
    CovCache(const Params& theta, const ModelSpec& spec, const ArmaApprox& trend);

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] const Eigen::MatrixXd& sigma_y() const noexcept { return sigma_y_; }
    [[nodiscard]] const Eigen::MatrixXd& chol() const noexcept { return chol_; }
    /// Cov(eta_k, y_s) for 1-based k, s.
    [[nodiscard]] double cov_eta_y(std::size_t k, std::size_t s) const noexcept;
    /// Cov(eps_k, y_s) for 1-based k, s.
    [[nodiscard]] double cov_eps_y(std::size_t k, std::size_t s) const noexcept;

    [[nodiscard]] const CoeffSeq& wold_trend() const noexcept { return phi_; }
    [[nodiscard]] const CoeffSeq& wold_cycle() const noexcept { return omega_; }
    [[nodiscard]] const CoeffSeq& arma_wold_trend() const noexcept { return b_; }
    [[nodiscard]] const CoeffSeq& wold_cycle_trunc() const noexcept { return omega_trunc_; }

    /// Exact Gaussian log-density of a demeaned series under N(0, Sigma_y).
    [[nodiscard]] double log_density(std::span<const double> y_demeaned) const;

private:
    std::size_t n_;
    Eigen::Matrix2d Q_;
    CoeffSeq phi_, omega_, b_, omega_trunc_;
    Eigen::MatrixXd sigma_y_, chol_;
};

/// Builds the covariance cache; throws NumericalError naming the smallest pivot
/// when Sigma_y is not numerically positive definite.
[[nodiscard]] CovCache structural_covariances(const Params& theta, const ModelSpec& spec,
                                              const CoeffMap& map);

/// Approximation corrections aligned with the observation they adjust: entry t
/// (0-based) holds the correction computed from y_1..y_t, so entry 0 is zero.
struct Corrections {
    std::vector<double> eps_x, eps_c;
    std::vector<double> y_corrected;  // input series minus both corrections
};

[[nodiscard]] Corrections correction_terms(const CovCache& cache,
                                           std::span<const double> y_demeaned);

}  // namespace fracuc
