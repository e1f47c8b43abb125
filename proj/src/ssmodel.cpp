#include "fracuc/ssmodel.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "fracuc/error.hpp"

namespace fracuc {

void ModelSpec::validate() const {
    std::ostringstream msg;
    if (v + w == 0) msg << "ARMA orders v, w must not both be zero; ";
    if (l < std::max<std::size_t>(p, 1)) msg << "truncation lag l must be at least max(p, 1); ";
    if (n <= l) msg << "sample length n=" << n << " must exceed l=" << l << "; ";
    if (!d_free && !std::isfinite(d_fixed)) msg << "fixed d must be finite; ";
    if (break_index && (*break_index < 1 || *break_index >= n)) {
        msg << "break index must lie inside the sample; ";
    }
    const auto text = msg.str();
    if (!text.empty()) throw ValidationError("invalid model spec: " + text.substr(0, text.size() - 2));
}

double Params::rho() const { return sigma_eta_eps / std::sqrt(sigma_eta2 * sigma_eps2); }

Eigen::Matrix2d Params::Q() const {
    Eigen::Matrix2d q;
    q << sigma_eta2, sigma_eta_eps, sigma_eta_eps, sigma_eps2;
    return q;
}

bool cycle_is_stable(double d, std::span<const double> phi, std::size_t samples) {
    if (phi.empty()) return true;
    const double two_pi = 2.0 * std::numbers::pi;
    auto h = [&](double lambda) {
        const std::complex<double> z = std::polar(1.0, lambda);
        const std::complex<double> g = 1.0 - std::pow(1.0 - z, d);
        std::complex<double> acc = 1.0, gk = 1.0;
        for (double c : phi) {
            gk *= g;
            acc -= c * gk;
        }
        return acc;
    };
    double winding = 0.0;
    std::complex<double> prev = h(0.0);
    double min_abs = std::abs(prev);
    for (std::size_t k = 1; k <= samples; ++k) {
        const auto cur = h(two_pi * static_cast<double>(k) / static_cast<double>(samples));
        min_abs = std::min(min_abs, std::abs(cur));
        winding += std::arg(cur / prev);
        prev = cur;
    }
    return min_abs > 1e-10 && std::fabs(winding) < std::numbers::pi;
}

std::string params_problem(const Params& theta, const ModelSpec& spec, const CoeffMap* map) {
    if (theta.phi.size() != spec.p) return "phi has the wrong length for p";
    if (spec.break_index.has_value() != theta.mu_break.has_value()) {
        return "break slope present/absent inconsistently with the spec";
    }
    if (!spec.drift && theta.mu1 != 0.0) return "drift excluded but mu1 is non-zero";
    const double vals[] = {theta.d, theta.sigma_eta2, theta.sigma_eta_eps, theta.sigma_eps2,
                           theta.mu0, theta.mu1, theta.mu_break.value_or(0.0)};
    for (double v : vals) {
        if (!std::isfinite(v)) return "non-finite parameter";
    }
    for (double v : theta.phi) {
        if (!std::isfinite(v)) return "non-finite AR coefficient";
    }
    if (!(theta.sigma_eta2 > 0.0) || !(theta.sigma_eps2 > 0.0)) return "variances must be positive";
    if (theta.sigma_eta2 * theta.sigma_eps2 - theta.sigma_eta_eps * theta.sigma_eta_eps < 0.0) {
        return "shock covariance matrix is not positive semidefinite";
    }
    if (!(theta.d > 0.0)) return "d must be positive";
    if (!spec.d_free && theta.d != spec.d_fixed) return "d differs from its fixed value";
    if (map != nullptr && !map->contains(theta.d) && !exact_integer_trend(theta.d, spec)) {
        return "d outside the ARMA coefficient map domain";
    }
    if (!cycle_is_stable(theta.d, theta.phi)) return "cycle AR polynomial is not stable";
    return {};
}

void validate_params(const Params& theta, const ModelSpec& spec, const CoeffMap* map) {
    const auto problem = params_problem(theta, spec, map);
    if (!problem.empty()) throw ValidationError("invalid parameters: " + problem);
}

std::vector<double> deterministic_path(const Params& theta, const ModelSpec& spec) {
    std::vector<double> out(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double t = static_cast<double>(i + 1);
        double m = theta.mu0 + theta.mu1 * t;
        if (spec.break_index && theta.mu_break) {
            m += *theta.mu_break * std::max(0.0, t - static_cast<double>(*spec.break_index));
        }
        out[i] = m;
    }
    return out;
}

bool exact_integer_trend(double d, const ModelSpec& spec) noexcept {
    return d == std::round(d) && d >= 1.0 && d <= static_cast<double>(spec.v);
}

ArmaApprox trend_arma(double d, const ModelSpec& spec, const CoeffMap& map) {
    if (exact_integer_trend(d, spec)) {
        return exact_integer_arma(static_cast<int>(d), spec.v, spec.w, map.horizon());
    }
    if (map.v() != spec.v || map.w() != spec.w) {
        throw ValidationError("coefficient map orders do not match the model spec");
    }
    return map.evaluate(d);
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Companion block whose first row (or first column) holds `coef`.
void companion(Triplets& trip, std::size_t off, std::size_t dim, std::span<const double> coef,
               bool first_column) {
    for (std::size_t i = 0; i < coef.size() && i < dim; ++i) {
        if (coef[i] == 0.0) continue;
        if (first_column) {
            trip.emplace_back(off + i, off, coef[i]);
        } else {
            trip.emplace_back(off, off + i, coef[i]);
        }
    }
    for (std::size_t i = 0; i + 1 < dim; ++i) {
        if (first_column) {
            trip.emplace_back(off + i, off + i + 1, 1.0);
        } else {
            trip.emplace_back(off + i + 1, off + i, 1.0);
        }
    }
}

/// Deterministic block, shared by both systems.
void add_mu_block(Triplets& trip, const Params& theta, const ModelSpec& spec,
                  Eigen::VectorXd& a1) {
    trip.emplace_back(0, 0, 1.0);
    trip.emplace_back(0, 1, 1.0);
    trip.emplace_back(1, 1, 1.0);
    if (spec.break_index) trip.emplace_back(2, 2, 1.0);
    a1.setZero();
    a1[0] = theta.mu0 + theta.mu1;
    a1[1] = theta.mu1;
    if (spec.break_index) a1[2] = theta.mu_break.value_or(0.0);
}

StateSpace assemble(const Params& theta, const ModelSpec& spec, std::size_t n_x,
                    std::span<const double> x_ar, std::span<const double> x_r, bool x_first_column,
                    std::size_t n_c, std::span<const double> c_ar) {
    StateSpace ss;
    const std::size_t n_mu = spec.break_index ? 3 : 2;
    const std::size_t k = n_mu + n_x + n_c;
    ss.n_mu = n_mu;
    ss.n_x = n_x;
    ss.n_c = n_c;
    ss.break_index = spec.break_index;
    ss.a1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));

    Triplets trip;
    add_mu_block(trip, theta, spec, ss.a1);
    companion(trip, n_mu, n_x, x_ar, x_first_column);
    companion(trip, n_mu + n_x, n_c, c_ar, false);
    ss.T.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    ss.T.setFromTriplets(trip.begin(), trip.end());

    ss.R = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), 2);
    for (std::size_t i = 0; i < x_r.size() && i < n_x; ++i) {
        ss.R(static_cast<Eigen::Index>(n_mu + i), 0) = x_r[i];
    }
    ss.R(static_cast<Eigen::Index>(n_mu + n_x), 1) = 1.0;

    ss.Z = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(k));
    ss.Z[0] = 1.0;
    ss.Z[static_cast<Eigen::Index>(n_mu)] = 1.0;
    ss.Z[static_cast<Eigen::Index>(n_mu + n_x)] = 1.0;

    ss.Q = theta.Q();
    ss.P1 = ss.R * ss.Q * ss.R.transpose();
    return ss;
}

std::vector<double> phi_with_one(const Params& theta) {
    std::vector<double> out{1.0};
    out.insert(out.end(), theta.phi.begin(), theta.phi.end());
    return out;
}

}  // namespace

StateSpace build_state_space(const Params& theta, const ModelSpec& spec, const CoeffMap& map) {
    spec.validate();
    if (theta.phi.size() != spec.p) throw ValidationError("phi has the wrong length for p");
    if (!exact_integer_trend(theta.d, spec) && !map.contains(theta.d)) {
        std::ostringstream msg;
        msg << "d=" << theta.d << " outside the ARMA coefficient map domain [" << map.d_min()
            << ", " << map.d_max() << "]";
        throw ValidationError(msg.str());
    }
    const ArmaApprox arma = trend_arma(theta.d, spec, map);
    const std::size_t u = std::max(spec.v, spec.w + 1);
    std::vector<double> rx(u, 0.0);
    rx[0] = 1.0;
    for (std::size_t j = 0; j < arma.ma.size(); ++j) rx[j + 1] = arma.ma[j];

    const auto delta = fracops::frac_ar_expand(theta.d, phi_with_one(theta), spec.l);
    std::vector<double> c_row(spec.l);
    for (std::size_t j = 0; j < spec.l; ++j) c_row[j] = -delta[j + 1];
    return assemble(theta, spec, u, arma.ar, rx, true, spec.l, c_row);
}

StateSpace build_exact_state_space(const Params& theta, const ModelSpec& spec) {
    spec.validate();
    if (theta.phi.size() != spec.p) throw ValidationError("phi has the wrong length for p");
    const std::size_t m = spec.n - 1;
    const auto pi = fracops::pi_coeffs(theta.d, spec.n);
    std::vector<double> x_row(m);
    for (std::size_t j = 0; j < m; ++j) x_row[j] = -pi[j + 1];
    const auto delta = fracops::frac_ar_expand(theta.d, phi_with_one(theta), m);
    std::vector<double> c_row(m);
    for (std::size_t j = 0; j < m; ++j) c_row[j] = -delta[j + 1];
    const std::vector<double> rx{1.0};
    return assemble(theta, spec, m, x_row, rx, false, m, c_row);
}

CovCache::CovCache(const Params& theta, const ModelSpec& spec, const ArmaApprox& trend)
    : n_(spec.n), Q_(theta.Q()) {
    const std::size_t n = n_;
    phi_ = fracops::phi_int_coeffs(theta.d, n);
    const auto phi1 = phi_with_one(theta);
    const auto delta = fracops::frac_ar_expand(theta.d, phi1, n - 1);
    omega_ = fracops::invert_ar(delta, n);
    b_ = arma_wold(trend.ar, trend.ma, n);
    const auto delta_trunc = fracops::frac_ar_expand(theta.d, phi1, spec.l);
    omega_trunc_ = fracops::invert_ar(delta_trunc, n);

    // Sigma_y(t, s) = Sigma_y(t-1, s-1) + w_{t-1}' Q w_{s-1}
    const auto N = static_cast<Eigen::Index>(n);
    sigma_y_.resize(N, N);
    const double a = Q_(0, 0), c = Q_(0, 1), e = Q_(1, 1);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t s = t; s < n; ++s) {
            const double inc = phi_[t] * (a * phi_[s] + c * omega_[s]) +
                               omega_[t] * (c * phi_[s] + e * omega_[s]);
            const double prev = t > 0 ? sigma_y_(static_cast<Eigen::Index>(t - 1),
                                                 static_cast<Eigen::Index>(s - 1))
                                      : 0.0;
            sigma_y_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) = prev + inc;
            sigma_y_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = prev + inc;
        }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(sigma_y_);
    if (llt.info() != Eigen::Success) {
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma_y_);
        const Eigen::VectorXd piv = ldlt.vectorD();
        Eigen::Index where = 0;
        const double smallest = piv.minCoeff(&where);
        std::ostringstream msg;
        msg << "Sigma_y is not positive definite: smallest pivot " << smallest << " at index "
            << where;
        throw NumericalError(msg.str());
    }
    chol_ = llt.matrixL();
}

double CovCache::cov_eta_y(std::size_t k, std::size_t s) const noexcept {
    if (s < k) return 0.0;
    return phi_[s - k] * Q_(0, 0) + omega_[s - k] * Q_(0, 1);
}

double CovCache::cov_eps_y(std::size_t k, std::size_t s) const noexcept {
    if (s < k) return 0.0;
    return phi_[s - k] * Q_(0, 1) + omega_[s - k] * Q_(1, 1);
}

double CovCache::log_density(std::span<const double> y_demeaned) const {
    if (y_demeaned.size() != n_) throw ValidationError("log_density: series length mismatch");
    const Eigen::Map<const Eigen::VectorXd> y(y_demeaned.data(), static_cast<Eigen::Index>(n_));
    const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(y);
    const double logdet = 2.0 * chol_.diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(n_) * std::log(2.0 * std::numbers::pi) + logdet +
                   z.squaredNorm());
}

CovCache structural_covariances(const Params& theta, const ModelSpec& spec, const CoeffMap& map) {
    spec.validate();
    if (spec.n > 4096) throw ValidationError("structural_covariances: n exceeds 4096");
    if (!exact_integer_trend(theta.d, spec) && !map.contains(theta.d)) {
        throw ValidationError("structural_covariances: d outside the coefficient map domain");
    }
    ArmaApprox arma = trend_arma(theta.d, spec, map);
    return CovCache(theta, spec, arma);
}

Corrections correction_terms(const CovCache& cache, std::span<const double> y_demeaned) {
    const std::size_t n = cache.n();
    if (y_demeaned.size() != n) throw ValidationError("correction_terms: series length mismatch");
    const auto& phi = cache.wold_trend();
    const auto& b = cache.arma_wold_trend();
    const auto& omega = cache.wold_cycle();
    const auto& omega_t = cache.wold_cycle_trunc();

    Corrections out;
    out.eps_x.assign(n, 0.0);
    out.eps_c.assign(n, 0.0);
    out.y_corrected.assign(y_demeaned.begin(), y_demeaned.end());

    const Eigen::Map<const Eigen::VectorXd> y(y_demeaned.data(), static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd& L = cache.chol();
    const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(y);

    std::vector<double> gx(n), gc(n);
    for (std::size_t t = 1; t < n; ++t) {
        // kernels (phi_j - b_j) and (omega_j - omega~_j); skip t when both vanish
        bool any = false;
        for (std::size_t j = 1; j <= t; ++j) {
            gx[j] = phi[j] - b[j];
            gc[j] = omega[j] - omega_t[j];
            any = any || gx[j] != 0.0 || gc[j] != 0.0;
        }
        if (!any) continue;

        const auto T = static_cast<Eigen::Index>(t);
        const Eigen::VectorXd wt = L.topLeftCorner(T, T).transpose()
                                       .triangularView<Eigen::Upper>()
                                       .solve(z.head(T));
        // eps^x_t = sum_j gx_j E[eta_{t+1-j} | F_t], E[eta_k | F_t] = sum_s Cov(eta_k, y_s) w_t(s)
        double ex = 0.0, ec = 0.0;
        for (std::size_t k = 1; k <= t; ++k) {
            const std::size_t j = t + 1 - k;
            if (gx[j] == 0.0 && gc[j] == 0.0) continue;
            double e_eta = 0.0, e_eps = 0.0;
            for (std::size_t s = k; s <= t; ++s) {
                const double ws = wt[static_cast<Eigen::Index>(s - 1)];
                e_eta += cache.cov_eta_y(k, s) * ws;
                e_eps += cache.cov_eps_y(k, s) * ws;
            }
            ex += gx[j] * e_eta;
            ec += gc[j] * e_eps;
        }
        out.eps_x[t] = ex;
        out.eps_c[t] = ec;
        out.y_corrected[t] -= ex + ec;
    }
    return out;
}

}  // namespace fracuc
