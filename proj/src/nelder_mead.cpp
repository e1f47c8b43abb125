#include "fracuc/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fracuc/error.hpp"

namespace fracuc {

namespace {

double sanitize(double v) {
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const std::vector<double>& step, const NelderMeadOptions& opts) {
    const std::size_t n = x0.size();
    if (step.size() != n) {
        throw ValidationError("nelder_mead: step size vector does not match dimension");
    }

    NelderMeadResult res;
    std::size_t evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return sanitize(f(x));
    };

    if (n == 0) {
        res.x = x0;
        res.fx = eval(x0);
        res.evaluations = evals;
        res.converged = true;
        return res;
    }

    const double dn = static_cast<double>(n);
    const double alpha = 1.0;
    const double gamma = opts.adaptive ? 1.0 + 2.0 / dn : 2.0;
    const double rho = opts.adaptive ? 0.75 - 1.0 / (2.0 * dn) : 0.5;
    const double sigma = opts.adaptive ? 1.0 - 1.0 / dn : 0.5;

    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> fv(n + 1);
    fv[0] = eval(x0);
    for (std::size_t i = 0; i < n; ++i) {
        auto& v = simplex[i + 1];
        double h = step[i] != 0.0 ? step[i] : 0.05;
        double fval = std::numeric_limits<double>::infinity();
        for (int attempt = 0; attempt < 8 && !std::isfinite(fval); ++attempt) {
            v[i] = x0[i] + h;
            fval = eval(v);
            if (std::isfinite(fval)) break;
            v[i] = x0[i] - h;
            fval = eval(v);
            h *= 0.5;
        }
        fv[i + 1] = fval;
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);

    std::size_t iter = 0;
    bool converged = false;
    while (iter < opts.max_iter && evals < opts.max_eval) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        {
            std::vector<std::vector<double>> s2(n + 1);
            std::vector<double> f2(n + 1);
            for (std::size_t k = 0; k <= n; ++k) {
                s2[k] = std::move(simplex[order[k]]);
                f2[k] = fv[order[k]];
            }
            simplex.swap(s2);
            fv.swap(f2);
        }

        const double fbest = fv[0];
        const double fworst = fv[n];
        if (std::isfinite(fworst) &&
            fworst - fbest <= opts.rel_ftol * (std::fabs(fbest) + opts.abs_floor)) {
            bool small = true;
            if (opts.xtol > 0.0) {
                for (std::size_t k = 1; k <= n && small; ++k) {
                    for (std::size_t i = 0; i < n; ++i) {
                        if (std::fabs(simplex[k][i] - simplex[0][i]) > opts.xtol) {
                            small = false;
                            break;
                        }
                    }
                }
            }
            if (small) {
                converged = true;
                break;
            }
        }
        ++iter;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i];
        }
        for (double& c : centroid) c /= dn;

        for (std::size_t i = 0; i < n; ++i) {
            xr[i] = centroid[i] + alpha * (centroid[i] - simplex[n][i]);
        }
        const double fr = eval(xr);

        if (fr < fv[0]) {
            for (std::size_t i = 0; i < n; ++i) {
                xe[i] = centroid[i] + gamma * (xr[i] - centroid[i]);
            }
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if (fr < fv[n - 1]) {
            simplex[n] = xr;
            fv[n] = fr;
            continue;
        }

        const bool outside = fr < fv[n];
        for (std::size_t i = 0; i < n; ++i) {
            xc[i] = outside ? centroid[i] + rho * (xr[i] - centroid[i])
                            : centroid[i] + rho * (simplex[n][i] - centroid[i]);
        }
        const double fc = eval(xc);
        if ((outside && fc <= fr) || (!outside && fc < fv[n])) {
            simplex[n] = xc;
            fv[n] = fc;
            continue;
        }

        // shrink toward the best vertex
        for (std::size_t k = 1; k <= n; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                simplex[k][i] = simplex[0][i] + sigma * (simplex[k][i] - simplex[0][i]);
            }
            fv[k] = eval(simplex[k]);
        }
    }

    const auto best = static_cast<std::size_t>(
        std::distance(fv.begin(), std::min_element(fv.begin(), fv.end())));
    res.x = simplex[best];
    res.fx = fv[best];
    res.iterations = iter;
    res.evaluations = evals;
    res.converged = converged;
    return res;
}

}  // namespace fracuc
