#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace fracuc {

struct NelderMeadOptions {
    double rel_ftol = 1e-8;   // stop when (f_worst - f_best) <= rel_ftol * (|f_best| + abs_floor)
    double abs_floor = 1e-10;
    double xtol = 0.0;        // optional simplex-diameter criterion, 0 disables it
    std::size_t max_iter = 5000;
    std::size_t max_eval = 20000;
    bool adaptive = true;     // dimension-dependent coefficients (Gao & Han)
};

struct NelderMeadResult {
    std::vector<double> x;
    double fx = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Objective for minimization. Returning +inf marks an infeasible point; the
/// simplex then treats it as worse than every finite value.
using Objective = std::function<double(const std::vector<double>&)>;

/**
 * @brief Derivative-free simplex minimization.
 *
 * The initial simplex is `x0` plus one vertex per coordinate displaced by
 * `step[i]`. If the displaced vertex is infeasible the opposite direction is
 * tried, then progressively smaller displacements.
 */
[[nodiscard]] NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                                           const std::vector<double>& step,
                                           const NelderMeadOptions& opts = {});

}  // namespace fracuc
