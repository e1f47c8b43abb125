#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "fracuc/error.hpp"
#include "fracuc/inference.hpp"

using namespace fracuc;

namespace {

/// Draws y = det + chol(Sigma_y) z for a parameter point.
std::vector<double> draw_series(const Params& th, const ModelSpec& spec, const CoeffMap& map,
                                std::uint64_t seed) {
    const auto cache = structural_covariances(th, spec, map);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::VectorXd z(static_cast<Eigen::Index>(spec.n));
    for (auto& v : z) v = nd(rng);
    const Eigen::VectorXd s = cache.chol() * z;
    auto y = deterministic_path(th, spec);
    for (std::size_t t = 0; t < spec.n; ++t) y[t] += s[static_cast<Eigen::Index>(t)];
    return y;
}

const CoeffMap& shared_map() {
    static const CoeffMap map = build_coeff_map(make_d_grid(0.8, 1.6, 0.05), 4, 4, 60);
    return map;
}

Params gdp_like() {
    Params th;
    th.d = 1.32;
    th.phi = {0.68};
    th.sigma_eta2 = 0.36;
    th.sigma_eta_eps = -0.6;
    th.sigma_eps2 = 1.06;
    th.mu0 = 5.0;
    th.mu1 = 0.8;
    return th;
}

ModelSpec spec_n(std::size_t n, std::size_t p = 1) {
    ModelSpec spec;
    spec.p = p;
    spec.n = n;
    return spec;
}

}  // namespace

TEST_CASE("local level filter matches the textbook recursion") {
    const std::size_t n = 50;
    ModelSpec spec = spec_n(n, 0);
    spec.drift = false;
    spec.v = 1;
    spec.w = 0;
    spec.l = 1;
    const auto map = build_coeff_map(make_d_grid(0.9, 1.2, 0.1), 1, 0, n);
    Params th;
    th.d = 1.0;
    th.sigma_eta2 = 0.4;
    th.sigma_eps2 = 1.7;
    th.mu0 = 3.0;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    std::vector<double> y(n);
    double lvl = 0.0;
    for (auto& v : y) {
        lvl += std::sqrt(0.4) * nd(rng);
        v = 3.0 + lvl + std::sqrt(1.7) * nd(rng);
    }
    const auto f = kalman_filter(build_state_space(th, spec, map), y);
    double a = 0.0, P = 0.4, ll = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double v = y[t] - 3.0 - a;
        const double F = P + 1.7;
        CHECK(std::fabs(f.v[t] - v) < 1e-12);
        CHECK(std::fabs(f.F[t] - F) < 1e-12);
        ll -= 0.5 * (std::log(2.0 * M_PI) + std::log(F) + v * v / F);
        const double K = P / F;
        a += K * v;
        P = P * (1.0 - K) + 0.4;
    }
    CHECK(std::fabs(f.loglik - ll) < 1e-10);
}

TEST_CASE("deterministic series gives zero prediction errors") {
    const auto& map = shared_map();
    ModelSpec spec = spec_n(40);
    const Params th = gdp_like();
    const auto y = deterministic_path(th, spec);
    const auto f = kalman_filter(build_state_space(th, spec, map), y);
    double ll = 0.0;
    for (std::size_t t = 0; t < 40; ++t) {
        CHECK(std::fabs(f.v[t]) < 1e-10);
        ll -= 0.5 * (std::log(2.0 * M_PI) + std::log(f.F[t]));
    }
    CHECK(f.loglik == doctest::Approx(ll).epsilon(1e-12));
}

TEST_CASE("filter reports the failing period") {
    const auto& map = shared_map();
    ModelSpec spec = spec_n(20);
    auto ss = build_state_space(gdp_like(), spec, map);
    ss.Q.setZero();
    ss.P1.setZero();
    const std::vector<double> y(20, 1.0);
    CHECK_THROWS_WITH_AS((void)kalman_filter(ss, y), doctest::Contains("t=1"), NumericalError);
}

TEST_CASE("likelihood routes") {
    const auto& map = shared_map();
    const ModelSpec spec = spec_n(60);
    Params th = gdp_like();
    const auto y = draw_series(th, spec, map, 21);

    SUBCASE("two exact routes agree") {
        const double g = loglik_checked(th, spec, y, map, LikelihoodRoute::ExactGaussian);
        const double ar = loglik_checked(th, spec, y, map, LikelihoodRoute::ExactAR);
        CHECK(std::fabs(g - ar) < 1e-6);
    }
    SUBCASE("corrected route is close to exact") {
        const double g = loglik_checked(th, spec, y, map, LikelihoodRoute::ExactGaussian);
        const double c = loglik_checked(th, spec, y, map, LikelihoodRoute::Corrected);
        CHECK(std::fabs(g - c) < 0.05);
    }
    SUBCASE("exact likelihood ignores the truncation lag") {
        ModelSpec s2 = spec;
        s2.l = 25;
        CHECK(loglik_checked(th, spec, y, map, LikelihoodRoute::ExactGaussian) ==
              doctest::Approx(loglik_checked(th, s2, y, map, LikelihoodRoute::ExactGaussian)).epsilon(1e-12));
    }
    SUBCASE("continuity in d") {
        for (auto r : {LikelihoodRoute::ExactGaussian, LikelihoodRoute::Corrected}) {
            th.d = 1.23;
            const double a = loglik_checked(th, spec, y, map, r);
            th.d = 1.2301;
            const double b = loglik_checked(th, spec, y, map, r);
            CHECK(std::fabs(a - b) < 1e-2);
        }
    }
    SUBCASE("sentinel for inadmissible points") {
        th.sigma_eta_eps = 5.0;
        CHECK(loglik_at(th, spec, y, map) == -std::numeric_limits<double>::infinity());
        CHECK_THROWS_AS((void)loglik_checked(th, spec, y, map, LikelihoodRoute::Corrected), ValidationError);
        th = gdp_like();
        th.d = 2.5;
        CHECK(loglik_at(th, spec, y, map) == -std::numeric_limits<double>::infinity());
    }
    SUBCASE("route names round trip") {
        for (auto r : {LikelihoodRoute::Corrected, LikelihoodRoute::ExactGaussian,
                       LikelihoodRoute::Uncorrected, LikelihoodRoute::ExactAR}) {
            CHECK(parse_route(route_name(r)) == r);
        }
        CHECK_THROWS_AS((void)parse_route("smoothed"), ValidationError);
    }
}

TEST_CASE("shrinking the cycle variance lowers the likelihood on a noisy path") {
    const auto& map = shared_map();
    const ModelSpec spec = spec_n(60);
    Params th = gdp_like();
    th.sigma_eta_eps = 0.0;
    const auto y = draw_series(th, spec, map, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (double s2 : {1.06, 0.3, 0.1, 0.03, 0.01}) {
        th.sigma_eps2 = s2;
        const double ll = loglik_checked(th, spec, y, map, LikelihoodRoute::ExactGaussian);
        CHECK(ll < prev);
        prev = ll;
    }
}

TEST_CASE("decomposition accounting") {
    const auto& map = shared_map();
    ModelSpec spec = spec_n(60);
    spec.break_index = 30;
    Params th = gdp_like();
    th.mu_break = -0.4;
    const auto y = draw_series(th, spec, map, 8);
    const auto dec = decompose(th, spec, y, map);
    for (std::size_t t = 0; t < spec.n; ++t) {
        CHECK(std::fabs(dec.trend[t] + dec.cycle[t] - y[t]) < 1e-8);
    }
    CHECK(dec.loglik == doctest::Approx(loglik_checked(th, spec, y, map, LikelihoodRoute::Corrected)));
    CHECK(dec.correction_x[0] == 0.0);
    CHECK(dec.deterministic[40] == doctest::Approx(5.0 + 0.8 * 41 - 0.4 * 11));
}

TEST_CASE("parameter codec") {
    ModelSpec spec = spec_n(50, 2);
    spec.break_index = 20;
    const ParamCodec codec(spec);
    CHECK(codec.size() == 1 + 2 + 3 + 3);
    Params th = gdp_like();
    th.phi = {0.5, -0.2};
    th.mu_break = 0.3;
    const auto z = codec.encode(th);
    const auto back = codec.decode(z);
    CHECK(back.d == th.d);
    CHECK(back.phi == th.phi);
    CHECK(back.sigma_eta2 == doctest::Approx(th.sigma_eta2));
    CHECK(back.sigma_eta_eps == doctest::Approx(th.sigma_eta_eps));
    CHECK(back.sigma_eps2 == doctest::Approx(th.sigma_eps2));
    CHECK(*back.mu_break == 0.3);
    CHECK(codec.names().size() == codec.size());
    CHECK(codec.names()[4] == "sigma_eta_eps");

    const auto J = codec.jacobian(z);
    const double h = 1e-6;
    for (std::size_t j = 0; j < z.size(); ++j) {
        auto zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        const auto np = codec.natural(codec.decode(zp));
        const auto nm = codec.natural(codec.decode(zm));
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double fd = (np[i] - nm[i]) / (2.0 * h);
            CHECK(J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
                  doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    }
    CHECK_THROWS_AS((void)codec.decode(std::vector<double>(3, 0.0)), ValidationError);

    spec.d_free = false;
    spec.break_index.reset();
    spec.drift = false;
    CHECK(ParamCodec(spec).size() == 2 + 3 + 1);
}

TEST_CASE("likelihood-ratio p-values") {
    CHECK(lr_test(-10.0, -10.0, 1) == doctest::Approx(1.0));
    CHECK(lr_test(0.0, 3.841458820694124 / 2.0, 1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(lr_test(-260.53, -258.55, 1) == doctest::Approx(0.0466).epsilon(0.01));
    CHECK(lr_test(0.0, 5.991464547107979 / 2.0, 2) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK_THROWS_AS((void)lr_test(-1.0, -2.0, 1), ValidationError);
    CHECK_THROWS_AS((void)lr_test(-1.0, -1.0, 0), ValidationError);
}

TEST_CASE("estimation") {
    const auto& map = shared_map();
    const ModelSpec spec = spec_n(60);
    const Params truth = gdp_like();
    const auto y = draw_series(truth, spec, map, 33);

    EstimateOptions opts;
    opts.starts = 4;
    opts.seed = 17;
    opts.threads = 1;

    SUBCASE("deterministic across thread counts") {
        const auto a = estimate(spec, y, map, opts);
        opts.threads = 3;
        const auto b = estimate(spec, y, map, opts);
        CHECK(a.loglik == b.loglik);
        CHECK(a.estimates == b.estimates);
        CHECK(a.n_starts == 4);
        CHECK(a.n_starts_used >= 1);
        CHECK(a.k == 7);
        CHECK(a.bic == doctest::Approx(7.0 * std::log(60.0) - 2.0 * a.loglik));
        CHECK(a.loglik >= loglik_checked(truth, spec, y, map, LikelihoodRoute::ExactGaussian) - 1e-6);
        if (a.hessian_pd) {
            for (double se : a.std_errors) CHECK((std::isnan(se) || se > 0.0));
        }
    }
    SUBCASE("start at the optimum stays there") {
        const auto a = estimate(spec, y, map, opts);
        const auto b = refine_fit(spec, y, map, a.params, opts);
        CHECK(b.loglik >= a.loglik - 1e-9);
        CHECK(b.loglik - a.loglik < 1e-2);
    }
    SUBCASE("bad input") {
        CHECK_THROWS_AS((void)estimate(spec, std::span<const double>(y).first(50), map, opts), ValidationError);
        opts.starts = 0;
        CHECK_THROWS_AS((void)estimate(spec, y, map, opts), ValidationError);
    }
}

namespace {

/// Compares attach_std_errors with a Hessian built here by a different stencil.
bool check_std_errors(const FitResult& fit, std::span<const double> y, const CoeffMap& map) {
    const ParamCodec codec(fit.spec);
    const auto z = codec.encode(fit.params);
    const auto m = static_cast<Eigen::Index>(z.size());
    const double h = 2e-4;
    auto nll = [&](std::vector<double> zz) {
        return -loglik_checked(codec.decode(zz), fit.spec, y, map, LikelihoodRoute::ExactGaussian);
    };
    Eigen::MatrixXd H(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            auto pp = z, pm = z, mp = z, mm = z;
            const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
            pp[a] += h; pp[b] += h;
            pm[a] += h; pm[b] -= h;
            mp[a] -= h; mp[b] += h;
            mm[a] -= h; mm[b] -= h;
            H(i, j) = (nll(pp) - nll(pm) - nll(mp) + nll(mm)) / (4.0 * h * h);
        }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(H);
    const bool pd = llt.info() == Eigen::Success;
    CHECK(fit.hessian_pd == pd);
    REQUIRE(fit.std_errors.size() == z.size());
    if (pd) {
        const auto J = codec.jacobian(z);
        const Eigen::MatrixXd cov = J * llt.solve(Eigen::MatrixXd::Identity(m, m)) * J.transpose();
        for (Eigen::Index i = 0; i < m; ++i) {
            const double se = fit.std_errors[static_cast<std::size_t>(i)];
            CHECK(se > 0.0);
            CHECK(se == doctest::Approx(std::sqrt(cov(i, i))).epsilon(0.02));
        }
    } else {
        for (double se : fit.std_errors) CHECK(std::isnan(se));
    }
    return pd;
}

}  // namespace

TEST_CASE("standard errors from an independent Hessian") {
    const auto& map = shared_map();
    const ModelSpec spec = spec_n(60, 0);
    Params th = gdp_like();
    th.phi.clear();
    th.sigma_eta_eps = -0.2;
    int pd = 0, not_pd = 0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto y = draw_series(th, spec, map, seed);
        FitResult fit;
        fit.spec = spec;
        fit.params = th;
        attach_std_errors(fit, y, map);
        (check_std_errors(fit, y, map) ? pd : not_pd) += 1;
    }
    CHECK(pd > 0);
    CHECK(not_pd > 0);
}

TEST_CASE("order selection") {
    const auto& map = shared_map();
    const ModelSpec spec = spec_n(60);
    const auto y = draw_series(gdp_like(), spec, map, 5);
    EstimateOptions opts;
    opts.starts = 2;
    opts.threads = 1;
    opts.std_errors = false;
    const auto sel = select_p(y, spec, 0, map, opts);
    CHECK(sel.p == 0);
    REQUIRE(sel.fits.size() == 1);
    CHECK(sel.fits[0].spec.p == 0);

    const auto sel2 = select_p(y, spec, 1, map, opts);
    REQUIRE(sel2.fits.size() == 2);
    const std::size_t expect = sel2.fits[1].bic < sel2.fits[0].bic ? 1 : 0;
    CHECK(sel2.p == expect);
}
