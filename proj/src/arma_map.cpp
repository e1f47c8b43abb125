#include "fracuc/arma_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "fracuc/nelder_mead.hpp"

namespace fracuc {

CoeffSeq arma_wold(std::span<const double> ar, std::span<const double> ma, std::size_t n) {
    if (n == 0) {
        throw ValidationError("arma_wold: length must be at least 1");
    }
    CoeffSeq b(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = j == 0 ? 1.0 : (j <= ma.size() ? ma[j - 1] : 0.0);
        const std::size_t kmax = std::min(j, ar.size());
        for (std::size_t k = 1; k <= kmax; ++k) {
            acc += ar[k - 1] * b[j - k];
        }
        b[j] = acc;
    }
    return b;
}

double arma_fit_error(double d, std::span<const double> ar, std::span<const double> ma,
                      std::size_t n) {
    const CoeffSeq target = fracops::phi_int_coeffs(d, n);
    const CoeffSeq b = arma_wold(ar, ma, n);
    double sse = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double e = target[j] - b[j];
        sse += e * e;
    }
    return sse / static_cast<double>(n);
}

ArmaApprox exact_integer_arma(int k, std::size_t v, std::size_t w, std::size_t n) {
    if (k < 0 || static_cast<std::size_t>(k) > v) {
        throw ValidationError("exact_integer_arma: integration order exceeds AR order");
    }
    ArmaApprox out;
    out.d = static_cast<double>(k);
    out.ar.assign(v, 0.0);
    out.ma.assign(w, 0.0);
    out.n = n;
    // (1-L)^k = sum_j binom(k, j) (-1)^j L^j, so a_j = -binom(k, j) (-1)^j
    double binom = 1.0;
    for (int j = 1; j <= k; ++j) {
        binom = binom * static_cast<double>(k - j + 1) / static_cast<double>(j);
        out.ar[static_cast<std::size_t>(j - 1)] = (j % 2 == 1) ? binom : -binom;
    }
    out.fit_mse = arma_fit_error(out.d, out.ar, out.ma, n);
    return out;
}

namespace {

struct FitProblem {
    std::size_t v, w, n;
    CoeffSeq target;

    double operator()(const std::vector<double>& x) const {
        // inline Wold recursion; bail out early once the weights blow up
        std::vector<double> b(n, 0.0);
        double sse = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = j == 0 ? 1.0 : (j <= w ? x[v + j - 1] : 0.0);
            const std::size_t kmax = std::min(j, v);
            for (std::size_t k = 1; k <= kmax; ++k) acc += x[k - 1] * b[j - k];
            b[j] = acc;
            const double e = target[j] - acc;
            sse += e * e;
            if (!(sse < 1e100)) return std::numeric_limits<double>::infinity();
        }
        return sse / static_cast<double>(n);
    }
};

struct RunOutcome {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    bool settled = false;
};

/// Residuals (b_j - target_j) / sqrt(n) with the analytic Jacobian of the Wold recursion.
struct LsqFunctor : Eigen::DenseFunctor<double> {
    const FitProblem& prob;

    explicit LsqFunctor(const FitProblem& p)
        : DenseFunctor(static_cast<int>(p.v + p.w), static_cast<int>(p.n)), prob(p) {}

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
        const std::size_t v = prob.v, w = prob.w, n = prob.n;
        std::vector<double> b(n, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(n));
        for (std::size_t j = 0; j < n; ++j) {
            double acc = j == 0 ? 1.0 : (j <= w ? x[static_cast<Eigen::Index>(v + j - 1)] : 0.0);
            for (std::size_t k = 1; k <= std::min(j, v); ++k) {
                acc += x[static_cast<Eigen::Index>(k - 1)] * b[j - k];
            }
            b[j] = acc;
            r[static_cast<Eigen::Index>(j)] = (acc - prob.target[j]) * scale;
        }
        return 0;
    }

    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
        const std::size_t v = prob.v, w = prob.w, n = prob.n;
        const auto ar = [&](std::size_t k) { return x[static_cast<Eigen::Index>(k - 1)]; };
        const CoeffSeq b = arma_wold(
            std::span<const double>(x.data(), v),
            std::span<const double>(x.data() + v, w), n);
        jac.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(v + w));
        for (std::size_t j = 1; j < n; ++j) {
            const auto row = static_cast<Eigen::Index>(j);
            for (std::size_t c = 0; c < v + w; ++c) {
                const auto col = static_cast<Eigen::Index>(c);
                double acc = 0.0;
                if (c < v) {
                    if (j >= c + 1) acc += b[j - c - 1];
                } else if (j == c - v + 1) {
                    acc += 1.0;
                }
                for (std::size_t k = 1; k <= std::min(j, v); ++k) {
                    acc += ar(k) * jac(row - static_cast<Eigen::Index>(k), col);
                }
                jac(row, col) = acc;
            }
        }
        jac /= std::sqrt(static_cast<double>(n));
        return 0;
    }
};

/// Levenberg-Marquardt polish from x; returns false when the budget ran out.
bool polish(const FitProblem& prob, std::vector<double>& x, double& f) {
    LsqFunctor fun(prob);
    Eigen::LevenbergMarquardt<LsqFunctor> lm(fun);
    lm.setMaxfev(2000);
    lm.setFtol(1e-15);
    lm.setXtol(1e-15);
    lm.setGtol(0.0);
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const auto status = lm.minimize(z);
    const std::vector<double> cand(z.data(), z.data() + z.size());
    const double fc = prob(cand);
    if (fc <= f) {
        x = cand;
        f = fc;
    }
    return status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
           status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters;
}

RunOutcome refine(const FitProblem& prob, std::vector<double> x, const ArmaFitOptions& opts) {
    NelderMeadOptions nm;
    nm.rel_ftol = 1e-13;
    nm.abs_floor = 1e-300;
    nm.max_iter = opts.evals_per_run;
    nm.max_eval = opts.evals_per_run;

    RunOutcome out;
    out.x = std::move(x);
    out.f = prob(out.x);
    if (out.f == 0.0) {
        out.settled = true;
        return out;
    }
    double scale = 0.1;
    for (std::size_t r = 0; r < opts.max_restarts; ++r) {
        if (std::isfinite(out.f) && polish(prob, out.x, out.f)) {
            out.settled = true;
            break;
        }
        // LM wandered off or stalled: shake the point with a simplex run and retry
        std::vector<double> step(out.x.size(), scale);
        const auto res = nelder_mead(std::cref(prob), out.x, step, nm);
        if (res.fx < out.f) {
            out.x = res.x;
            out.f = res.fx;
        }
        scale = std::max(scale * 0.5, 1e-4);
    }
    return out;
}

/// Linearised (Prony-type) seed: least squares on phi_j = sum_k a_k phi_{j-k} for j > w.
std::vector<double> prony_seed(const FitProblem& prob) {
    const std::size_t v = prob.v, w = prob.w, n = prob.n;
    std::vector<double> x(v + w, 0.0);
    if (v > 0 && n > w + 1 + v) {
        const auto rows = static_cast<Eigen::Index>(n - w - 1);
        Eigen::MatrixXd A(rows, static_cast<Eigen::Index>(v));
        Eigen::VectorXd rhs(rows);
        for (std::size_t j = w + 1; j < n; ++j) {
            const auto r = static_cast<Eigen::Index>(j - w - 1);
            rhs[r] = prob.target[j];
            for (std::size_t k = 1; k <= v; ++k) {
                A(r, static_cast<Eigen::Index>(k - 1)) = j >= k ? prob.target[j - k] : 0.0;
            }
        }
        const Eigen::VectorXd a = A.colPivHouseholderQr().solve(rhs);
        for (std::size_t k = 0; k < v; ++k) x[k] = a[static_cast<Eigen::Index>(k)];
    }
    for (std::size_t j = 1; j <= w; ++j) {
        double m = prob.target[j];
        for (std::size_t k = 1; k <= std::min(j, v); ++k) m -= x[k - 1] * prob.target[j - k];
        x[v + j - 1] = m;
    }
    return x;
}

ArmaApprox to_approx(double d, std::size_t v, std::size_t n,
                     const std::vector<double>& x, double f) {
    ArmaApprox a;
    a.d = d;
    a.n = n;
    a.ar.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(v));
    a.ma.assign(x.begin() + static_cast<std::ptrdiff_t>(v), x.end());
    a.fit_mse = f;
    return a;
}

std::vector<double> to_vector(const ArmaApprox& a, std::size_t v, std::size_t w) {
    std::vector<double> x(v + w, 0.0);
    for (std::size_t i = 0; i < std::min(v, a.ar.size()); ++i) x[i] = a.ar[i];
    for (std::size_t i = 0; i < std::min(w, a.ma.size()); ++i) x[v + i] = a.ma[i];
    return x;
}

}  // namespace

ArmaApprox fit_arma_approx(double d, std::size_t v, std::size_t w, std::size_t n,
                           const ArmaApprox* warm, const ArmaFitOptions& opts) {
    if (!std::isfinite(d) || d < 0.0) {
        throw ValidationError("fit_arma_approx: d must be finite and non-negative");
    }
    if (v + w == 0) {
        throw ValidationError("fit_arma_approx: need at least one ARMA coefficient");
    }
    if (n < v + w + 1) {
        throw ValidationError("fit_arma_approx: horizon shorter than v + w + 1");
    }

    FitProblem prob{v, w, n, fracops::phi_int_coeffs(d, n)};

    std::vector<std::vector<double>> starts;
    starts.emplace_back(v + w, 0.0);
    starts.push_back(prony_seed(prob));
    for (double k : {std::floor(d), std::ceil(d)}) {
        if (k >= 1.0 && k <= static_cast<double>(v)) {
            starts.push_back(to_vector(exact_integer_arma(static_cast<int>(k), v, w, n), v, w));
        }
    }
    if (warm != nullptr) {
        starts.push_back(to_vector(*warm, v, w));
    }

    RunOutcome best;
    for (const auto& s : starts) {
        RunOutcome r = refine(prob, s, opts);
        const bool better = (r.settled && !best.settled) ||
                            (r.settled == best.settled && r.f < best.f);
        if (better) best = std::move(r);
        if (best.settled && best.f == 0.0) break;
    }

    ArmaApprox out = to_approx(d, v, n, best.x, best.f);
    if (!best.settled || !std::isfinite(best.f)) {
        std::ostringstream msg;
        msg << "ARMA(" << v << "," << w << ") fit at d=" << d
            << " did not settle; best mean squared error " << best.f;
        throw ArmaFitError(msg.str(), out);
    }
    return out;
}

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) {
        throw ValidationError("spline: need at least two knots of matching size");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x_[i] > x_[i - 1])) {
            throw ValidationError("spline: knots must be strictly increasing");
        }
    }
    m_.assign(n, 0.0);
    if (n == 2) return;

    // tridiagonal system for interior second derivatives, natural end conditions
    std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 2; i + 1 < n; ++i) {
        const double lower = x_[i] - x_[i - 1];
        const double factor = lower / diag[i - 1];
        diag[i] -= factor * upper[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
        m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
        if (i == 1) break;
    }
}

double NaturalCubicSpline::operator()(double t) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    if (i >= x_.size() - 1) i = x_.size() - 2;
    const double h = x_[i + 1] - x_[i];
    const double a = t - x_[i];
    if (a == 0.0) return y_[i];
    const double b = x_[i + 1] - t;
    if (b == 0.0) return y_[i + 1];
    return m_[i] * b * b * b / (6.0 * h) + m_[i + 1] * a * a * a / (6.0 * h) +
           (y_[i] / h - m_[i] * h / 6.0) * b + (y_[i + 1] / h - m_[i + 1] * h / 6.0) * a;
}

CoeffMap::CoeffMap(std::vector<ArmaApprox> knots, std::size_t v, std::size_t w, std::size_t n)
    : knots_(std::move(knots)), v_(v), w_(w), n_(n) {
    if (knots_.size() < 2) {
        throw ValidationError("CoeffMap: need at least two grid points");
    }
    grid_.reserve(knots_.size());
    for (const auto& k : knots_) {
        if (k.ar.size() != v_ || k.ma.size() != w_) {
            throw ValidationError("CoeffMap: knot coefficient sizes do not match (v, w)");
        }
        grid_.push_back(k.d);
    }
    auto column = [&](auto getter) {
        std::vector<double> ys;
        ys.reserve(knots_.size());
        for (const auto& k : knots_) ys.push_back(getter(k));
        return NaturalCubicSpline(grid_, std::move(ys));
    };
    for (std::size_t i = 0; i < v_; ++i) {
        ar_splines_.push_back(column([i](const ArmaApprox& k) { return k.ar[i]; }));
    }
    for (std::size_t i = 0; i < w_; ++i) {
        ma_splines_.push_back(column([i](const ArmaApprox& k) { return k.ma[i]; }));
    }
}

ArmaApprox CoeffMap::evaluate(double d) const {
    if (!std::isfinite(d) || !contains(d)) {
        std::ostringstream msg;
        msg << "d=" << d << " outside the ARMA coefficient map domain [" << d_min() << ", "
            << d_max() << "]";
        throw ValidationError(msg.str());
    }
    const auto it = std::lower_bound(grid_.begin(), grid_.end(), d);
    if (it != grid_.end() && *it == d) {
        return knots_[static_cast<std::size_t>(it - grid_.begin())];
    }
    ArmaApprox out;
    out.d = d;
    out.n = n_;
    out.ar.reserve(v_);
    out.ma.reserve(w_);
    std::vector<double> x = spline_coefficients(d);
    FitProblem prob{v_, w_, n_, fracops::phi_int_coeffs(d, n_)};
    double f = prob(x);
    if (std::isfinite(f)) (void)polish(prob, x, f);
    out.ar.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(v_));
    out.ma.assign(x.begin() + static_cast<std::ptrdiff_t>(v_), x.end());
    out.fit_mse = f;
    return out;
}

std::vector<double> CoeffMap::spline_coefficients(double d) const {
    std::vector<double> x;
    x.reserve(v_ + w_);
    for (const auto& s : ar_splines_) x.push_back(s(d));
    for (const auto& s : ma_splines_) x.push_back(s(d));
    return x;
}

std::vector<double> make_d_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) {
        throw ValidationError("make_d_grid: need lo < hi and a positive step");
    }
    // integer arithmetic on hundredths-style ticks keeps knots such as 1.0 exact
    const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step));
    std::vector<double> grid;
    grid.reserve(count + 1);
    const double denom = 1e6;
    const auto lo_i = std::llround(lo * denom);
    const auto step_i = std::llround(step * denom);
    for (std::size_t i = 0; i <= count; ++i) {
        grid.push_back(static_cast<double>(lo_i + static_cast<long long>(i) * step_i) / denom);
    }
    return grid;
}

std::vector<double> default_d_grid() { return make_d_grid(0.5, 2.5, 0.05); }

CoeffMap build_coeff_map(const std::vector<double>& d_grid, std::size_t v, std::size_t w,
                         std::size_t n, const ArmaFitOptions& opts) {
    if (d_grid.size() < 4) {
        throw ValidationError("build_coeff_map: grid needs at least 4 points");
    }
    for (std::size_t i = 0; i < d_grid.size(); ++i) {
        if (!(d_grid[i] > 0.0) || (i > 0 && !(d_grid[i] > d_grid[i - 1]))) {
            throw ValidationError("build_coeff_map: grid must be positive and ascending");
        }
    }

    std::vector<ArmaApprox> knots;
    knots.reserve(d_grid.size());
    for (std::size_t i = 0; i < d_grid.size(); ++i) {
        const ArmaApprox* warm = knots.empty() ? nullptr : &knots.back();
        knots.push_back(fit_arma_approx(d_grid[i], v, w, n, warm, opts));
    }

    // continuity pass: prefer the neighbour-consistent solution when it fits as well
    const std::size_t m = knots.size();
    for (std::size_t i = 0; i < m; ++i) {
        const auto lo = to_vector(knots[i == 0 ? 1 : i - 1], v, w);
        const auto hi = to_vector(knots[i + 1 == m ? m - 2 : i + 1], v, w);
        std::vector<double> seed(v + w);
        for (std::size_t c = 0; c < v + w; ++c) {
            if (i == 0) {
                seed[c] = 2.0 * lo[c] - to_vector(knots[2], v, w)[c];
            } else if (i + 1 == m) {
                seed[c] = 2.0 * hi[c] - to_vector(knots[m - 3], v, w)[c];
            } else {
                seed[c] = 0.5 * (lo[c] + hi[c]);
            }
        }
        FitProblem prob{v, w, n, fracops::phi_int_coeffs(d_grid[i], n)};
        const RunOutcome r = refine(prob, seed, opts);
        if (r.settled && r.f <= knots[i].fit_mse * (1.0 + 1e-6) + 1e-14) {
            knots[i] = to_approx(d_grid[i], v, n, r.x, r.f);
        }
    }
    return CoeffMap(std::move(knots), v, w, n);
}

}  // namespace fracuc
