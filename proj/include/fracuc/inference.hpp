#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fracuc/arma_map.hpp"
#include "fracuc/ssmodel.hpp"

namespace fracuc {

/// Filtered quantities of one pass of the Kalman filter.
struct FilterOutput {
    std::vector<double> v, F;           // prediction errors and their variances
    std::vector<double> level;          // deterministic part a_{t|t}
    std::vector<double> x, c;           // filtered trend and cycle states
    double loglik = 0.0;
};

/**
 * @brief Gaussian prediction-error recursion for a system without observation noise.
 *
 * Throws NumericalError naming t when F_t is not positive.
 */
[[nodiscard]] FilterOutput kalman_filter(const StateSpace& ss, std::span<const double> y);

/// How the likelihood is evaluated.
enum class LikelihoodRoute {
    Corrected,       // truncated filter on y minus the approximation corrections
    ExactGaussian,   // log-density of y under N(deterministic, Sigma_y)
    Uncorrected,     // truncated filter on y as is (starting values only)
    ExactAR,         // filter on the AR(n-1) state space
};

[[nodiscard]] const char* route_name(LikelihoodRoute r) noexcept;
[[nodiscard]] LikelihoodRoute parse_route(const std::string& s);

/// Log-likelihood at theta; returns -infinity for inadmissible theta or numerical breakdown.
[[nodiscard]] double loglik_at(const Params& theta, const ModelSpec& spec,
                               std::span<const double> y, const CoeffMap& map,
                               LikelihoodRoute route = LikelihoodRoute::Corrected);

/// Same as loglik_at but throws instead of returning the sentinel.
[[nodiscard]] double loglik_checked(const Params& theta, const ModelSpec& spec,
                                    std::span<const double> y, const CoeffMap& map,
                                    LikelihoodRoute route);

/// Filtered trend-cycle decomposition with the correction terms itemised.
struct Decomposition {
    std::vector<double> y, deterministic;
    std::vector<double> trend, cycle;            // trend + cycle = y
    std::vector<double> correction_x, correction_c;
    std::vector<double> v, F;
    double loglik = 0.0;
};

/// trend_t = level + x_{t|t} + correction_x_t and cycle_t = c_{t|t} + correction_c_t.
[[nodiscard]] Decomposition decompose(const Params& theta, const ModelSpec& spec,
                                      std::span<const double> y, const CoeffMap& map);

/**
 * @brief Bijection between Params and the unconstrained optimisation vector
 *   [d?] [phi_1..phi_p] [log sigma_eta2, atanh rho, log sigma_eps2] [mu0, mu1?, mu_break?].
 */
class ParamCodec {
public:
    explicit ParamCodec(ModelSpec spec);
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    /// Position of atanh(rho) in the transformed vector.
    [[nodiscard]] std::size_t rho_index() const noexcept {
        return (spec_.d_free ? 1 : 0) + spec_.p + 1;
    }
    [[nodiscard]] std::vector<double> encode(const Params& theta) const;
    [[nodiscard]] Params decode(std::span<const double> z) const;
    /// Natural-scale values in the same order as names().
    [[nodiscard]] std::vector<double> natural(const Params& theta) const;
    [[nodiscard]] std::vector<std::string> names() const;
    /// d natural / d z, square and block diagonal.
    [[nodiscard]] Eigen::MatrixXd jacobian(std::span<const double> z) const;
    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }

private:
    ModelSpec spec_;
    std::size_t size_;
};

struct EstimateOptions {
    std::size_t starts = 100;
    std::uint64_t seed = 1;
    double coarse_rel_tol = 1e-4;
    std::size_t coarse_max_iter = 2000;
    double fine_rel_tol = 1e-8;
    std::size_t fine_max_iter = 5000;
    std::size_t fine_restarts = 4;
    LikelihoodRoute route = LikelihoodRoute::ExactGaussian;
    double hessian_step = 1e-4;
    double max_abs_atanh_rho = 5.0;  // search wall on the correlation coordinate
    bool std_errors = true;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct FitResult {
    ModelSpec spec;
    Params params;
    double loglik = 0.0;
    double bic = 0.0;
    std::size_t k = 0;                        // free parameters
    std::vector<std::string> names;
    std::vector<double> estimates;            // natural scale, same order as names
    std::vector<double> std_errors;           // NaN where undefined
    bool hessian_pd = false;
    bool converged = false;
    std::size_t n_starts = 0;
    std::size_t n_starts_used = 0;            // starts that produced a finite value
    double stage1_loglik = 0.0;
    std::size_t stage2_iterations = 0;
    EstimateOptions options;
};

/// Multi-start two-stage maximum likelihood; throws NumericalError when every start fails.
[[nodiscard]] FitResult estimate(const ModelSpec& spec, std::span<const double> y,
                                 const CoeffMap& map, const EstimateOptions& opts = {});

/// Stage 2 and standard errors only, starting from a given point.
[[nodiscard]] FitResult refine_fit(const ModelSpec& spec, std::span<const double> y,
                                   const CoeffMap& map, const Params& start,
                                   const EstimateOptions& opts = {});

/// Standard errors from the central-difference Hessian in transformed coordinates.
void attach_std_errors(FitResult& fit, std::span<const double> y, const CoeffMap& map);

struct SelectResult {
    std::size_t p = 0;
    std::vector<FitResult> fits;  // successful fits in increasing p
    std::vector<std::string> failures;
};

/// Fits p = 0..p_max and returns the BIC minimiser; ties go to the smaller p.
[[nodiscard]] SelectResult select_p(std::span<const double> y, const ModelSpec& spec_template,
                                    std::size_t p_max, const CoeffMap& map,
                                    const EstimateOptions& opts = {});

/// Upper-tail chi-square p-value of 2 (ll_u - ll_r) with df degrees of freedom.
[[nodiscard]] double lr_test(double loglik_restricted, double loglik_unrestricted, std::size_t df);

}  // namespace fracuc
