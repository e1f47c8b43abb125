#include "fracuc/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>

#include "fracuc/error.hpp"
#include "fracuc/nelder_mead.hpp"
#include "fracuc/rng.hpp"

namespace fracuc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<double> demean(std::span<const double> y, const std::vector<double>& det) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] - det[i];
    return out;
}

}  // namespace

FilterOutput kalman_filter(const StateSpace& ss, std::span<const double> y) {
    const std::size_t n = y.size();
    const auto k = idx(ss.dim());
    if (ss.T.rows() != k || ss.R.rows() != k || ss.Z.size() != k || ss.a1.size() != k) {
        throw ValidationError("kalman_filter: inconsistent state-space dimensions");
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> T_break;
    if (ss.break_index) {
        T_break = ss.T;
        T_break.coeffRef(0, 2) += 1.0;
    }
    const Eigen::MatrixXd RQR = ss.R * ss.Q * ss.R.transpose();
    // small systems are faster with dense products
    const bool dense = k <= 64;
    Eigen::MatrixXd Td, Td_break;
    if (dense) {
        Td = Eigen::MatrixXd(ss.T);
        if (ss.break_index) Td_break = Eigen::MatrixXd(T_break);
    }

    FilterOutput out;
    out.v.resize(n);
    out.F.resize(n);
    out.level.resize(n);
    out.x.resize(n);
    out.c.resize(n);

    Eigen::VectorXd a = ss.a1;
    Eigen::MatrixXd P = ss.P1;
    Eigen::VectorXd M(k);
    Eigen::MatrixXd TP(k, k);
    const auto xo = idx(ss.x_offset());
    const auto co = idx(ss.c_offset());
    double ll = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double v = y[t] - ss.Z.dot(a);
        M.noalias() = P * ss.Z.transpose();
        const double F = ss.Z.dot(M);
        if (!(F > 0.0) || !std::isfinite(F)) {
            std::ostringstream msg;
            msg << "kalman_filter: non-positive prediction variance " << F << " at t=" << t + 1;
            throw NumericalError(msg.str());
        }
        out.v[t] = v;
        out.F[t] = F;
        ll -= 0.5 * (kLog2Pi + std::log(F) + v * v / F);

        a.noalias() += M * (v / F);
        P.noalias() -= M * M.transpose() / F;
        out.level[t] = a[0];
        out.x[t] = a[xo];
        out.c[t] = a[co];

        if (t + 1 < n) {
            const bool brk = ss.break_active(t + 1);
            if (dense) {
                const auto& T = brk ? Td_break : Td;
                a = T * a;
                TP.noalias() = T * P;
                P.noalias() = TP * T.transpose();
            } else {
                const auto& T = brk ? T_break : ss.T;
                a = T * a;
                TP.noalias() = T * P;
                P.noalias() = TP * T.transpose();
            }
            P += RQR;
        }
    }
    out.loglik = ll;
    return out;
}

const char* route_name(LikelihoodRoute r) noexcept {
    switch (r) {
        case LikelihoodRoute::Corrected: return "corrected";
        case LikelihoodRoute::ExactGaussian: return "exact";
        case LikelihoodRoute::Uncorrected: return "uncorrected";
        case LikelihoodRoute::ExactAR: return "exact-ar";
    }
    return "unknown";
}

LikelihoodRoute parse_route(const std::string& s) {
    for (auto r : {LikelihoodRoute::Corrected, LikelihoodRoute::ExactGaussian,
                   LikelihoodRoute::Uncorrected, LikelihoodRoute::ExactAR}) {
        if (s == route_name(r)) return r;
    }
    throw ValidationError("unknown likelihood route '" + s + "'");
}

namespace {

double loglik_unchecked(const Params& theta, const ModelSpec& spec, std::span<const double> y,
                        const CoeffMap& map, LikelihoodRoute route) {
    switch (route) {
        case LikelihoodRoute::Uncorrected:
            return kalman_filter(build_state_space(theta, spec, map), y).loglik;
        case LikelihoodRoute::ExactAR:
            return kalman_filter(build_exact_state_space(theta, spec), y).loglik;
        case LikelihoodRoute::ExactGaussian: {
            const auto cache = structural_covariances(theta, spec, map);
            return cache.log_density(demean(y, deterministic_path(theta, spec)));
        }
        case LikelihoodRoute::Corrected: {
            const auto det = deterministic_path(theta, spec);
            const auto cache = structural_covariances(theta, spec, map);
            const auto corr = correction_terms(cache, demean(y, det));
            std::vector<double> yc(y.begin(), y.end());
            for (std::size_t t = 0; t < yc.size(); ++t) yc[t] -= corr.eps_x[t] + corr.eps_c[t];
            return kalman_filter(build_state_space(theta, spec, map), yc).loglik;
        }
    }
    throw ValidationError("unknown likelihood route");
}

}  // namespace

double loglik_checked(const Params& theta, const ModelSpec& spec, std::span<const double> y,
                      const CoeffMap& map, LikelihoodRoute route) {
    if (y.size() != spec.n) throw ValidationError("series length does not match the model spec");
    validate_params(theta, spec, &map);
    return loglik_unchecked(theta, spec, y, map, route);
}

double loglik_at(const Params& theta, const ModelSpec& spec, std::span<const double> y,
                 const CoeffMap& map, LikelihoodRoute route) {
    if (y.size() != spec.n) throw ValidationError("series length does not match the model spec");
    if (!params_problem(theta, spec, &map).empty()) return kNegInf;
    try {
        const double ll = loglik_unchecked(theta, spec, y, map, route);
        return std::isfinite(ll) ? ll : kNegInf;
    } catch (const Error&) {
        return kNegInf;
    }
}

Decomposition decompose(const Params& theta, const ModelSpec& spec, std::span<const double> y,
                        const CoeffMap& map) {
    if (y.size() != spec.n) throw ValidationError("series length does not match the model spec");
    validate_params(theta, spec, &map);
    Decomposition out;
    out.y.assign(y.begin(), y.end());
    out.deterministic = deterministic_path(theta, spec);
    const auto cache = structural_covariances(theta, spec, map);
    const auto corr = correction_terms(cache, demean(y, out.deterministic));
    std::vector<double> yc(y.begin(), y.end());
    for (std::size_t t = 0; t < yc.size(); ++t) yc[t] -= corr.eps_x[t] + corr.eps_c[t];
    const auto f = kalman_filter(build_state_space(theta, spec, map), yc);
    out.correction_x = corr.eps_x;
    out.correction_c = corr.eps_c;
    out.trend.resize(spec.n);
    out.cycle.resize(spec.n);
    for (std::size_t t = 0; t < spec.n; ++t) {
        out.trend[t] = f.level[t] + f.x[t] + corr.eps_x[t];
        out.cycle[t] = f.c[t] + corr.eps_c[t];
    }
    out.v = f.v;
    out.F = f.F;
    out.loglik = f.loglik;
    return out;
}

// ---------------------------------------------------------------------------

ParamCodec::ParamCodec(ModelSpec spec) : spec_(std::move(spec)) {
    size_ = (spec_.d_free ? 1 : 0) + spec_.p + 3 + spec_.n_deterministic();
}

std::vector<double> ParamCodec::encode(const Params& theta) const {
    std::vector<double> z;
    z.reserve(size_);
    if (spec_.d_free) z.push_back(theta.d);
    z.insert(z.end(), theta.phi.begin(), theta.phi.end());
    z.push_back(std::log(theta.sigma_eta2));
    z.push_back(std::atanh(std::clamp(theta.rho(), -1.0 + 1e-15, 1.0 - 1e-15)));
    z.push_back(std::log(theta.sigma_eps2));
    z.push_back(theta.mu0);
    if (spec_.drift) z.push_back(theta.mu1);
    if (spec_.break_index) z.push_back(theta.mu_break.value_or(0.0));
    return z;
}

Params ParamCodec::decode(std::span<const double> z) const {
    if (z.size() != size_) throw ValidationError("ParamCodec: vector has the wrong length");
    Params th;
    std::size_t i = 0;
    th.d = spec_.d_free ? z[i++] : spec_.d_fixed;
    th.phi.assign(z.begin() + static_cast<std::ptrdiff_t>(i),
                  z.begin() + static_cast<std::ptrdiff_t>(i + spec_.p));
    i += spec_.p;
    const double a = z[i++], r = z[i++], b = z[i++];
    th.sigma_eta2 = std::exp(a);
    th.sigma_eps2 = std::exp(b);
    th.sigma_eta_eps = std::tanh(r) * std::exp(0.5 * (a + b));
    th.mu0 = z[i++];
    th.mu1 = spec_.drift ? z[i++] : 0.0;
    if (spec_.break_index) th.mu_break = z[i++];
    return th;
}

std::vector<double> ParamCodec::natural(const Params& theta) const {
    std::vector<double> out;
    if (spec_.d_free) out.push_back(theta.d);
    out.insert(out.end(), theta.phi.begin(), theta.phi.end());
    out.push_back(theta.sigma_eta2);
    out.push_back(theta.sigma_eta_eps);
    out.push_back(theta.sigma_eps2);
    out.push_back(theta.mu0);
    if (spec_.drift) out.push_back(theta.mu1);
    if (spec_.break_index) out.push_back(theta.mu_break.value_or(0.0));
    return out;
}

std::vector<std::string> ParamCodec::names() const {
    std::vector<std::string> out;
    if (spec_.d_free) out.emplace_back("d");
    for (std::size_t k = 1; k <= spec_.p; ++k) out.push_back("phi" + std::to_string(k));
    out.emplace_back("sigma_eta2");
    out.emplace_back("sigma_eta_eps");
    out.emplace_back("sigma_eps2");
    out.emplace_back("mu0");
    if (spec_.drift) out.emplace_back("mu1");
    if (spec_.break_index) out.emplace_back("mu_break");
    return out;
}

Eigen::MatrixXd ParamCodec::jacobian(std::span<const double> z) const {
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(idx(size_), idx(size_));
    const std::size_t i = (spec_.d_free ? 1 : 0) + spec_.p;
    const double a = z[i], r = z[i + 1], b = z[i + 2];
    const double s = std::exp(0.5 * (a + b));
    const double cov = std::tanh(r) * s;
    J(idx(i), idx(i)) = std::exp(a);
    J(idx(i + 1), idx(i)) = 0.5 * cov;
    J(idx(i + 1), idx(i + 1)) = (1.0 - std::tanh(r) * std::tanh(r)) * s;
    J(idx(i + 1), idx(i + 2)) = 0.5 * cov;
    J(idx(i + 2), idx(i + 2)) = std::exp(b);
    return J;
}

// ---------------------------------------------------------------------------

namespace {

struct Objective2 {
    const ParamCodec& codec;
    std::span<const double> y;
    const CoeffMap& map;
    LikelihoodRoute route;
    double rho_wall = std::numeric_limits<double>::infinity();

    double operator()(const std::vector<double>& z) const {
        if (std::fabs(z[codec.rho_index()]) > rho_wall) return std::numeric_limits<double>::infinity();
        const double ll = loglik_at(codec.decode(z), codec.spec(), y, map, route);
        return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    }
};

std::vector<double> simplex_steps(const ModelSpec& spec, double sd_dy) {
    std::vector<double> step;
    if (spec.d_free) step.push_back(0.1);
    for (std::size_t k = 0; k < spec.p; ++k) step.push_back(0.1);
    step.push_back(0.5);
    step.push_back(0.5);
    step.push_back(0.5);
    step.push_back(sd_dy);
    if (spec.drift) step.push_back(0.1 * sd_dy);
    if (spec.break_index) step.push_back(0.1 * sd_dy);
    return step;
}

struct DiffStats {
    double mean = 0.0, var = 1.0;
};

DiffStats diff_stats(std::span<const double> y) {
    DiffStats s;
    if (y.size() < 3) return s;
    const std::size_t m = y.size() - 1;
    double sum = 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) sum += y[t] - y[t - 1];
    s.mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) {
        const double e = y[t] - y[t - 1] - s.mean;
        ss += e * e;
    }
    s.var = ss / static_cast<double>(m - 1);
    if (!(s.var > 0.0)) s.var = 1.0;
    return s;
}

/// Random starting point inside the documented boxes.
Params draw_start(const ModelSpec& spec, const CoeffMap& map, const DiffStats& ds,
                  std::span<const double> y, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    Params th;
    th.d = spec.d_free ? uni(map.d_min(), map.d_max()) : spec.d_fixed;
    th.phi.assign(spec.p, 0.0);
    for (int attempt = 0; attempt < 2000; ++attempt) {
        for (double& c : th.phi) c = uni(-2.0, 2.0);
        if (cycle_is_stable(th.d, th.phi)) break;
        if (attempt == 1999) std::fill(th.phi.begin(), th.phi.end(), 0.0);
    }
    const double shift = std::log(ds.var);
    const double a = uni(-6.0, 4.0) + shift;
    const double b = uni(-6.0, 4.0) + shift;
    const double r = uni(-3.0, 3.0);
    th.sigma_eta2 = std::exp(a);
    th.sigma_eps2 = std::exp(b);
    th.sigma_eta_eps = std::tanh(r) * std::exp(0.5 * (a + b));
    th.mu1 = spec.drift ? ds.mean : 0.0;
    th.mu0 = y[0] - th.mu1;
    if (spec.break_index) th.mu_break = 0.0;
    return th;
}

/// Repeated simplex runs until a restart no longer improves by the relative tolerance.
NelderMeadResult fine_stage(const Objective2& f, std::vector<double> z0,
                            const std::vector<double>& step, const EstimateOptions& opts) {
    NelderMeadOptions nm;
    nm.rel_ftol = opts.fine_rel_tol;
    nm.max_iter = opts.fine_max_iter;
    nm.max_eval = 4 * opts.fine_max_iter;
    NelderMeadResult best;
    best.x = std::move(z0);
    best.fx = f(best.x);
    std::size_t iters = 0;
    bool converged = false;
    for (std::size_t r = 0; r <= opts.fine_restarts; ++r) {
        auto res = nelder_mead(std::cref(f), best.x, step, nm);
        iters += res.iterations;
        const double prev = best.fx;
        if (res.fx <= best.fx) {
            best.x = res.x;
            best.fx = res.fx;
        }
        converged = res.converged;
        if (!std::isfinite(prev) && std::isfinite(best.fx)) continue;
        if (res.converged && prev - best.fx <= opts.fine_rel_tol * (std::fabs(best.fx) + 1e-10)) {
            break;
        }
    }
    best.iterations = iters;
    best.converged = converged;
    return best;
}

FitResult finish(const ModelSpec& spec, std::span<const double> y, const CoeffMap& map,
                 const ParamCodec& codec, const NelderMeadResult& fine,
                 const EstimateOptions& opts) {
    FitResult fit;
    fit.spec = spec;
    fit.options = opts;
    fit.params = codec.decode(fine.x);
    fit.loglik = -fine.fx;
    fit.k = codec.size();
    fit.bic = static_cast<double>(fit.k) * std::log(static_cast<double>(spec.n)) - 2.0 * fit.loglik;
    fit.names = codec.names();
    fit.estimates = codec.natural(fit.params);
    fit.std_errors.assign(fit.k, std::numeric_limits<double>::quiet_NaN());
    fit.converged = fine.converged;
    fit.stage2_iterations = fine.iterations;
    if (opts.std_errors) attach_std_errors(fit, y, map);
    return fit;
}

unsigned worker_count(unsigned requested, std::size_t jobs) {
    unsigned hw = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(jobs, 1)));
}

}  // namespace

void attach_std_errors(FitResult& fit, std::span<const double> y, const CoeffMap& map) {
    const ParamCodec codec(fit.spec);
    const Objective2 f{codec, y, map, fit.options.route};
    const auto z = codec.encode(fit.params);
    const std::size_t m = z.size();
    const double h = fit.options.hessian_step;
    const double f0 = f(z);
    Eigen::MatrixXd H(idx(m), idx(m));  // Hessian of -loglik
    auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
        auto zz = z;
        zz[i] += di;
        zz[j] += dj;
        return f(zz);
    };
    bool finite = std::isfinite(f0);
    for (std::size_t i = 0; i < m && finite; ++i) {
        const double fp = at(i, h, i, 0.0), fm = at(i, -h, i, 0.0);
        H(idx(i), idx(i)) = (fp - 2.0 * f0 + fm) / (h * h);
        for (std::size_t j = 0; j < i; ++j) {
            const double v = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) +
                              at(i, -h, j, -h)) / (4.0 * h * h);
            H(idx(i), idx(j)) = v;
            H(idx(j), idx(i)) = v;
        }
        finite = H.row(idx(i)).allFinite();
    }
    fit.std_errors.assign(m, std::numeric_limits<double>::quiet_NaN());
    fit.hessian_pd = false;
    if (!finite || !H.allFinite()) return;
    const Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) return;
    const Eigen::MatrixXd cov_z = llt.solve(Eigen::MatrixXd::Identity(idx(m), idx(m)));
    const Eigen::MatrixXd J = codec.jacobian(z);
    const Eigen::MatrixXd cov = J * cov_z * J.transpose();
    fit.hessian_pd = true;
    for (std::size_t i = 0; i < m; ++i) {
        const double v = cov(idx(i), idx(i));
        fit.std_errors[i] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    }
}

FitResult estimate(const ModelSpec& spec, std::span<const double> y, const CoeffMap& map,
                   const EstimateOptions& opts) {
    spec.validate();
    if (y.size() != spec.n) throw ValidationError("series length does not match the model spec");
    if (opts.starts == 0) throw ValidationError("estimate: need at least one starting value");
    const ParamCodec codec(spec);
    const DiffStats ds = diff_stats(y);
    const auto step = simplex_steps(spec, std::sqrt(ds.var));
    const Objective2 coarse{codec, y, map, LikelihoodRoute::Uncorrected, opts.max_abs_atanh_rho};

    NelderMeadOptions nm;
    nm.rel_ftol = opts.coarse_rel_tol;
    nm.max_iter = opts.coarse_max_iter;
    nm.max_eval = 4 * opts.coarse_max_iter;

    std::vector<NelderMeadResult> results(opts.starts);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t s = next++; s < opts.starts; s = next++) {
            Rng rng(sub_seed(opts.seed, s));
            const Params start = draw_start(spec, map, ds, y, rng);
            results[s] = nelder_mead(std::cref(coarse), codec.encode(start), step, nm);
        }
    };
    const unsigned nthreads = worker_count(opts.threads, opts.starts);
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < nthreads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // deterministic reduction: lowest objective, ties to the lowest start index
    std::size_t best = opts.starts;
    std::size_t used = 0;
    for (std::size_t s = 0; s < opts.starts; ++s) {
        if (!std::isfinite(results[s].fx)) continue;
        ++used;
        if (best == opts.starts || results[s].fx < results[best].fx) best = s;
    }
    if (best == opts.starts) {
        throw NumericalError("estimate: all " + std::to_string(opts.starts) +
                             " starting values failed to produce a finite likelihood");
    }

    const Objective2 fine_obj{codec, y, map, opts.route, opts.max_abs_atanh_rho};
    const auto fine = fine_stage(fine_obj, results[best].x, step, opts);
    if (!std::isfinite(fine.fx)) {
        throw NumericalError("estimate: refinement left the admissible region");
    }
    FitResult fit = finish(spec, y, map, codec, fine, opts);
    fit.n_starts = opts.starts;
    fit.n_starts_used = used;
    fit.stage1_loglik = -results[best].fx;
    return fit;
}

FitResult refine_fit(const ModelSpec& spec, std::span<const double> y, const CoeffMap& map,
                     const Params& start, const EstimateOptions& opts) {
    spec.validate();
    if (y.size() != spec.n) throw ValidationError("series length does not match the model spec");
    validate_params(start, spec, &map);
    const ParamCodec codec(spec);
    const DiffStats ds = diff_stats(y);
    const auto step = simplex_steps(spec, std::sqrt(ds.var));
    const Objective2 fine_obj{codec, y, map, opts.route, opts.max_abs_atanh_rho};
    auto z0 = codec.encode(start);
    double& r0 = z0[codec.rho_index()];
    r0 = std::clamp(r0, -opts.max_abs_atanh_rho, opts.max_abs_atanh_rho);
    const auto fine = fine_stage(fine_obj, z0, step, opts);
    if (!std::isfinite(fine.fx)) throw NumericalError("refine_fit: likelihood not finite");
    FitResult fit = finish(spec, y, map, codec, fine, opts);
    fit.n_starts = 1;
    fit.n_starts_used = 1;
    fit.stage1_loglik = loglik_at(start, spec, y, map, opts.route);
    return fit;
}

SelectResult select_p(std::span<const double> y, const ModelSpec& spec_template, std::size_t p_max,
                      const CoeffMap& map, const EstimateOptions& opts) {
    SelectResult out;
    double best_bic = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p <= p_max; ++p) {
        ModelSpec spec = spec_template;
        spec.p = p;
        spec.l = std::max(spec.l, std::max<std::size_t>(p, 1));
        try {
            out.fits.push_back(estimate(spec, y, map, opts));
        } catch (const Error& e) {
            out.failures.push_back("p=" + std::to_string(p) + ": " + e.what());
            continue;
        }
        if (out.fits.back().bic < best_bic) {
            best_bic = out.fits.back().bic;
            out.p = p;
        }
    }
    if (out.fits.empty()) {
        std::string msg = "select_p: every order failed";
        for (const auto& f : out.failures) msg += "; " + f;
        throw NumericalError(msg);
    }
    return out;
}

double lr_test(double loglik_restricted, double loglik_unrestricted, std::size_t df) {
    if (df < 1) throw ValidationError("lr_test: df must be at least 1");
    if (!std::isfinite(loglik_restricted) || !std::isfinite(loglik_unrestricted)) {
        throw ValidationError("lr_test: log-likelihoods must be finite");
    }
    if (loglik_unrestricted < loglik_restricted - 1e-8) {
        throw ValidationError("lr_test: unrestricted log-likelihood below the restricted one");
    }
    const double stat = std::max(0.0, 2.0 * (loglik_unrestricted - loglik_restricted));
    const boost::math::chi_squared dist(static_cast<double>(df));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace fracuc
