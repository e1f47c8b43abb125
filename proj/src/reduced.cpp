#include "fracuc/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/SVD>

#include "fracuc/error.hpp"

namespace fracuc {

namespace {

void require_unit_lead(std::span<const double> h, const char* name) {
    if (h.empty() || h[0] != 1.0) {
        throw ValidationError(std::string("aggregate_ma: ") + name + " must start with 1");
    }
}

/// g_l = sum_{k=1}^{min(l,p)} varsigma_{k,l} h_k with g_0 = h_0.
CoeffSeq ld_to_standard(std::span<const double> h, const std::vector<CoeffSeq>& powers, std::size_t n) {
    CoeffSeq g(n, 0.0);
    g[0] = h[0];
    for (std::size_t k = 1; k < h.size() && k <= powers.size(); ++k) {
        if (h[k] == 0.0) continue;
        const auto& row = powers[k - 1];
        for (std::size_t l = k; l < n; ++l) g[l] += h[k] * row[l];
    }
    return g;
}

CoeffSeq phi_polynomial(std::span<const double> phi) {
    CoeffSeq h(phi.size() + 1);
    h[0] = 1.0;
    for (std::size_t k = 0; k < phi.size(); ++k) h[k + 1] = -phi[k];
    return h;
}

ReducedWeights weights_general(double d, std::span<const double> phi, std::size_t n) {
    const auto powers = fracops::varsigma_table(d, std::max<std::size_t>(phi.size(), 1), n);
    const auto h = phi_polynomial(phi);
    const CoeffSeq h_tilde{1.0, -1.0};
    return {ld_to_standard(h, powers, n), ld_to_standard(h_tilde, powers, n)};
}

/// Closed form for p <= 2: g_l = (phi1 + 2 phi2) pi_l(d) - phi2 pi_l(2d), g~_l = pi_l(d).
ReducedWeights weights_closed(double d, std::span<const double> phi, std::size_t n) {
    const double p1 = phi.size() > 0 ? phi[0] : 0.0;
    const double p2 = phi.size() > 1 ? phi[1] : 0.0;
    const auto pd = fracops::pi_coeffs(d, n);
    const auto p2d = fracops::pi_coeffs(2.0 * d, n);
    ReducedWeights w;
    w.g.assign(n, 0.0);
    w.g_tilde = pd;
    w.g[0] = 1.0;
    for (std::size_t l = 1; l < n; ++l) w.g[l] = (p1 + 2.0 * p2) * pd[l] - p2 * p2d[l];
    return w;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> lag_coefficients(const ReducedWeights& w, std::size_t J) {
    const std::size_t n = w.g.size();
    Eigen::Matrix<double, Eigen::Dynamic, 3> A =
        Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(static_cast<Eigen::Index>(J + 1), 3);
    for (std::size_t j = 0; j <= J && j < n; ++j) {
        double ee = 0.0, uu = 0.0, eu = 0.0;
        for (std::size_t l = j; l < n; ++l) {
            ee += w.g[l] * w.g[l - j];
            uu += w.g_tilde[l] * w.g_tilde[l - j];
            eu += w.g[l] * w.g_tilde[l - j] + w.g_tilde[l] * w.g[l - j];
        }
        const auto r = static_cast<Eigen::Index>(j);
        A(r, 0) = ee;
        A(r, 1) = uu;
        A(r, 2) = eu;
    }
    return A;
}

std::vector<double> apply_variances(const Eigen::Matrix<double, Eigen::Dynamic, 3>& A, const Params& th) {
    const Eigen::Vector3d s(th.sigma_eta2, th.sigma_eps2, th.sigma_eta_eps);
    const Eigen::VectorXd g = A * s;
    return {g.data(), g.data() + g.size()};
}

void require_length(std::size_t n, const char* who) {
    if (n < 1) throw ValidationError(std::string(who) + ": length must be at least 1");
}

}  // namespace

PreciseReducedForm aggregate_ma_precise(std::span<const double> h, std::span<const double> h_tilde,
                                        const Eigen::Matrix2d& Q, double d, std::size_t n) {
    using R = PreciseReal;
    require_unit_lead(h, "h");
    require_unit_lead(h_tilde, "h_tilde");
    require_length(n, "aggregate_ma");
    if (!(d > 0.0) || !std::isfinite(d)) throw ValidationError("aggregate_ma: d must be positive");
    const double s_eta2 = Q(0, 0), s_eps2 = Q(1, 1), s_ee = Q(0, 1);
    if (s_eta2 < 0.0 || s_eps2 < 0.0 || s_ee * s_ee > s_eta2 * s_eps2 * (1.0 + 1e-12)) {
        throw ValidationError("aggregate_ma: shock covariance is not positive semi-definite");
    }
    const double su2 = s_eta2 + s_eps2 + 2.0 * s_ee;
    if (!(su2 > 1e-14 * (s_eta2 + s_eps2))) {
        throw ValidationError("aggregate_ma: aggregate shock variance sigma_u2 is zero");
    }

    PreciseReducedForm rf;
    rf.d = d;
    rf.sigma_u2 = R(s_eta2) + R(s_eps2) + 2 * R(s_ee);

    const R dd(d);
    std::vector<R> ld(n, R(0));
    {
        R p(1);
        for (std::size_t j = 1; j < n; ++j) {
            p = p * (R(j) - 1 - dd) / R(j);
            ld[j] = -p;
        }
    }
    rf.varsigma.assign(n > 1 ? n - 1 : 0, std::vector<R>(n, R(0)));
    if (n > 1) rf.varsigma[0] = ld;
    for (std::size_t k = 2; k < n; ++k) {
        const auto& prev = rf.varsigma[k - 2];
        auto& row = rf.varsigma[k - 1];
        for (std::size_t i = k; i < n; ++i) {
            R acc(0);
            for (std::size_t j = k - 1; j + 1 <= i; ++j) acc += prev[j] * ld[i - j];
            row[i] = acc;
        }
    }

    auto to_standard = [&](std::span<const double> poly) {
        std::vector<R> g(n, R(0));
        g[0] = R(poly[0]);
        for (std::size_t k = 1; k < poly.size() && k < n; ++k) {
            if (poly[k] == 0.0) continue;
            const R coef(poly[k]);
            for (std::size_t l = k; l < n; ++l) g[l] += coef * rf.varsigma[k - 1][l];
        }
        return g;
    };
    rf.g = to_standard(h);
    rf.g_tilde = to_standard(h_tilde);

    const R q_eta(s_eta2), q_eps(s_eps2), q_ee(s_ee);
    rf.c_std.assign(n, R(0));
    for (std::size_t l = 0; l < n; ++l) {
        const R& g = rf.g[l];
        const R& gt = rf.g_tilde[l];
        R q = g * g * q_eta + gt * gt * q_eps + 2 * g * gt * q_ee;
        if (q < 0) q = 0;
        rf.c_std[l] = sqrt(q / rf.sigma_u2);
    }

    rf.psi.assign(n, R(0));
    rf.psi[0] = 1;
    for (std::size_t l = 1; l < n; ++l) {
        R acc = rf.c_std[l];
        for (std::size_t k = 1; k < l; ++k) acc -= rf.varsigma[k - 1][l] * rf.psi[k];
        const R& diag = rf.varsigma[l - 1][l];
        if (diag == 0) {
            std::ostringstream msg;
            msg << "aggregate_ma: varsigma_{" << l << "," << l << "}(d) is zero";
            throw NumericalError(msg.str());
        }
        rf.psi[l] = acc / diag;
    }
    return rf;
}

ReducedForm aggregate_ma(std::span<const double> h, std::span<const double> h_tilde,
                         const Eigen::Matrix2d& Q, double d, std::size_t n) {
    const auto precise = aggregate_ma_precise(h, h_tilde, Q, d, n);
    auto round = [](const std::vector<PreciseReal>& v) {
        CoeffSeq out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]);
        return out;
    };
    ReducedForm rf;
    rf.d = d;
    rf.sigma_u2 = static_cast<double>(precise.sigma_u2);
    rf.g = round(precise.g);
    rf.g_tilde = round(precise.g_tilde);
    rf.c_std = round(precise.c_std);
    rf.psi = round(precise.psi);
    for (std::size_t l = 0; l < rf.psi.size(); ++l) {
        if (!std::isfinite(rf.psi[l])) {
            std::ostringstream msg;
            msg << "aggregate_ma: psi_" << l << " overflows double precision at d = " << d;
            throw NumericalError(msg.str());
        }
    }
    return rf;
}

ReducedForm reduced_psi(const Params& theta, const ModelSpec& spec) {
    if (theta.phi.size() != spec.p) throw ValidationError("reduced_psi: phi does not have length p");
    const auto h = phi_polynomial(theta.phi);
    const CoeffSeq h_tilde{1.0, -1.0};
    return aggregate_ma(h, h_tilde, theta.Q(), theta.d, spec.n);
}

ReducedWeights reduced_weights(double d, std::span<const double> phi, std::size_t n) {
    require_length(n, "reduced_weights");
    return phi.size() <= 2 ? weights_closed(d, phi, n) : weights_general(d, phi, n);
}

std::vector<double> autocov_reduced(const Params& theta, std::size_t J, std::size_t n) {
    require_length(n, "autocov_reduced");
    return apply_variances(lag_coefficients(reduced_weights(theta.d, theta.phi, n), J), theta);
}

std::vector<double> autocov_reduced_general(const Params& theta, std::size_t J, std::size_t n) {
    require_length(n, "autocov_reduced");
    return apply_variances(lag_coefficients(weights_general(theta.d, theta.phi, n), J), theta);
}

Eigen::Matrix3d identification_matrix(double d, std::span<const double> phi, std::size_t n) {
    if (n < 3) throw ValidationError("identification_matrix: need n >= 3");
    return lag_coefficients(reduced_weights(d, phi, n), 2);
}

VarianceTriple identify_sigmas(std::span<const double> gamma, double d, std::span<const double> phi,
                               std::size_t n, double max_cond) {
    if (gamma.size() < 3) throw ValidationError("identify_sigmas: need gamma_0, gamma_1, gamma_2");
    const Eigen::Matrix3d A = identification_matrix(d, phi, n);
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cond = sv(2) > 0.0 ? sv(0) / sv(2) : std::numeric_limits<double>::infinity();
    if (!(cond <= max_cond)) {
        std::ostringstream msg;
        msg << "identify_sigmas: variance parameters not identified at d = " << d << ", p = "
            << phi.size() << " (condition number " << cond << ")";
        throw NumericalError(msg.str());
    }
    const Eigen::Vector3d s = svd.solve(Eigen::Vector3d(gamma[0], gamma[1], gamma[2]));
    return {s(0), s(2), s(1)};
}

BnDecomposition bn_decompose(std::span<const double> u, std::span<const double> theta, double d) {
    if (theta.empty()) throw ValidationError("bn_decompose: theta must have at least one coefficient");
    const std::size_t n = u.size();
    BnDecomposition out;
    if (n == 0) return out;
    double total = 0.0;
    for (double t : theta) total += t;
    out.trend = fracops::fracdiff(u, -d);
    for (double& v : out.trend) v *= total;

    // standard-lag weights of sum_k theta*_k L_d^k
    const std::size_t m = theta.size();
    CoeffSeq tail(m, 0.0);
    for (std::size_t k = m - 1; k-- > 0;) tail[k] = tail[k + 1] + theta[k + 1];
    const std::size_t kmax = std::min(m > 0 ? m - 1 : 0, n - 1);
    const auto powers = fracops::varsigma_table(d, kmax, n);
    CoeffSeq w(n, 0.0);
    w[0] = tail[0];
    for (std::size_t k = 1; k <= kmax; ++k) {
        for (std::size_t i = k; i < n; ++i) w[i] += tail[k] * powers[k - 1][i];
    }
    out.cycle = fracops::apply_filter(w, u);
    for (double& v : out.cycle) v = -v;
    return out;
}

BnDecomposition bn_decompose(std::span<const double> eta, std::span<const double> eps,
                             const Params& theta) {
    if (eta.size() != eps.size()) throw ValidationError("bn_decompose: eta and eps lengths differ");
    const std::size_t n = eta.size();
    BnDecomposition out;
    if (n == 0) return out;
    // long-run value: 1 on eta, (1 - 1) / phi(1) = 0 on eps
    out.trend = fracops::fracdiff(eta, -theta.d);
    // tail sums of (1 - z)/phi(z) are -Omega_k, so the cycle weights are those of phi(L_d)^{-1}
    CoeffSeq one_phi(theta.phi.size() + 1, 1.0);
    for (std::size_t k = 0; k < theta.phi.size(); ++k) one_phi[k + 1] = theta.phi[k];
    const auto delta = fracops::frac_ar_expand(theta.d, one_phi, n - 1);
    const auto omega = fracops::invert_ar(delta, n);
    out.cycle = fracops::apply_filter(omega, eps);
    return out;
}

GphResult gph_estimate(std::span<const double> y, double alpha, GphInput input) {
    if (y.size() < 32) throw ValidationError("gph_estimate: need at least 32 observations");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("gph_estimate: alpha must lie in (0, 1)");
    std::vector<double> x;
    if (input == GphInput::Differenced) {
        x.resize(y.size() - 1);
        for (std::size_t t = 1; t < y.size(); ++t) x[t - 1] = y[t] - y[t - 1];
    } else {
        x.assign(y.begin(), y.end());
    }
    const std::size_t N = x.size();
    const auto m = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(N), alpha)));
    if (m < 3 || m >= N / 2) throw ValidationError("gph_estimate: bandwidth leaves too few frequencies");

    const double two_pi = 2.0 * std::numbers::pi;
    Eigen::VectorXd ly(static_cast<Eigen::Index>(m)), lx(static_cast<Eigen::Index>(m));
    for (std::size_t j = 1; j <= m; ++j) {
        const double lam = two_pi * static_cast<double>(j) / static_cast<double>(N);
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < N; ++t) {
            const double a = lam * static_cast<double>(t);
            re += x[t] * std::cos(a);
            im -= x[t] * std::sin(a);
        }
        const double I = (re * re + im * im) / (two_pi * static_cast<double>(N));
        if (!(I > 0.0)) throw NumericalError("gph_estimate: zero periodogram ordinate");
        ly(static_cast<Eigen::Index>(j - 1)) = std::log(I);
        lx(static_cast<Eigen::Index>(j - 1)) = -2.0 * std::log(2.0 * std::sin(lam / 2.0));
    }
    const double mx = lx.mean(), my = ly.mean();
    const Eigen::VectorXd cx = lx.array() - mx;
    const Eigen::VectorXd cy = ly.array() - my;
    const double sxx = cx.squaredNorm();
    const double slope = cx.dot(cy) / sxx;
    const Eigen::VectorXd resid = cy - slope * cx;
    const double s2 = resid.squaredNorm() / static_cast<double>(m - 2);

    GphResult r;
    r.input = input;
    r.m = m;
    r.d_hat = slope + (input == GphInput::Differenced ? 1.0 : 0.0);
    r.se = std::sqrt(s2 / sxx);
    r.se_asymptotic = std::numbers::pi / std::sqrt(24.0 * static_cast<double>(m));
    return r;
}

}  // namespace fracuc
