#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracuc/arma_map.hpp"
#include "fracuc/inference.hpp"
#include "fracuc/ssmodel.hpp"

namespace fracuc {

/// One draw of the structural model with its latent pieces.
struct SimPath {
    std::vector<double> y, deterministic, x, c, eta, eps;
    std::uint64_t seed = 0;
    Params params;
    ModelSpec spec;
};

/**
 * @brief Draws t = 1..n from the type II model with zero pre-sample values.
 *
 * (eta_t, eps_t) = L z_t with L the lower Cholesky factor of Q, x = (1-L)^{-d} eta,
 * and c from the full AR(n-1) recursion c_t = eps_t - sum_{j<t} delta_j c_{t-j}.
 * Throws ValidationError when Q is not positive semidefinite.
 */
[[nodiscard]] SimPath simulate(const Params& theta, const ModelSpec& spec, std::size_t n,
                               std::uint64_t seed);

struct MonteCarloOptions {
    std::size_t reps = 100;
    std::uint64_t seed = 1;
    std::optional<ModelSpec> fit_spec;  // model fitted to each draw; defaults to the DGP spec
    EstimateOptions estimate{.starts = 20, .std_errors = false};
    unsigned threads = 0;               // 0: hardware concurrency
};

struct ParamSummary {
    std::string name;
    double truth = 0.0;
    double mean = 0.0, bias = 0.0, sd = 0.0, rmse = 0.0;
    std::size_t count = 0;
};

struct MonteCarloResult {
    std::vector<std::string> names;
    std::vector<ParamSummary> summary;
    std::vector<std::vector<double>> estimates;  // per rep; empty when the fit failed
    std::vector<double> loglik;                  // NaN when the fit failed
    std::vector<std::string> failures;           // "rep r: message"
    double failure_rate = 0.0;
    std::size_t reps = 0;
};

/**
 * @brief Repeated simulate-then-estimate.
 *
 * Rep r simulates with sub_seed(seed, 2r) and seeds its starts with
 * sub_seed(seed, 2r + 1), so the table does not depend on the thread count.
 * Parameters the fitted model shares with the DGP are compared with the DGP
 * values; an AR coefficient beyond the DGP order has truth zero.
 */
[[nodiscard]] MonteCarloResult monte_carlo(const Params& theta, const ModelSpec& spec, std::size_t n,
                                           const CoeffMap& map, const MonteCarloOptions& opts = {});

/// Recomputes the summary table from per-rep estimates.
[[nodiscard]] std::vector<ParamSummary> summarise(const std::vector<std::string>& names,
                                                  const std::vector<double>& truth,
                                                  const std::vector<std::vector<double>>& estimates);

}  // namespace fracuc
