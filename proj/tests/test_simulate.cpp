#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fracuc/error.hpp"
#include "fracuc/fracops.hpp"
#include "fracuc/reduced.hpp"
#include "fracuc/simulate.hpp"

using namespace fracuc;

namespace {

Params gdp_like() {
    Params th;
    th.d = 1.32;
    th.phi = {0.68};
    th.sigma_eta2 = 0.36;
    th.sigma_eta_eps = -0.60;
    th.sigma_eps2 = 1.06;
    th.mu0 = 800.0;
    th.mu1 = 0.8;
    return th;
}

ModelSpec spec_p(std::size_t p) {
    ModelSpec spec;
    spec.p = p;
    return spec;
}

std::vector<double> phi_with_one(const Params& th) {
    std::vector<double> one{1.0};
    one.insert(one.end(), th.phi.begin(), th.phi.end());
    return one;
}

double sample_mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("structural simulation") {
    SUBCASE("components add up") {
        Params th = gdp_like();
        th.mu_break = -0.3;
        ModelSpec spec = spec_p(1);
        spec.break_index = 50;
        const auto path = simulate(th, spec, 120, 4);
        REQUIRE(path.y.size() == 120);
        CHECK(path.spec.n == 120);
        for (std::size_t t = 0; t < 120; ++t) {
            const double tt = static_cast<double>(t + 1);
            const double det = 800.0 + 0.8 * tt - 0.3 * std::max(0.0, tt - 50.0);
            CHECK(path.deterministic[t] == doctest::Approx(det).epsilon(1e-15));
            CHECK(std::fabs(path.y[t] - (det + path.x[t] + path.c[t])) < 1e-12);
        }
    }
    SUBCASE("components solve their defining equations") {
        const Params th = gdp_like();
        const auto path = simulate(th, spec_p(1), 200, 9);
        const auto eta = fracops::fracdiff(path.x, th.d);
        const auto delta = fracops::frac_ar_expand(th.d, phi_with_one(th), 199);
        const auto eps = fracops::apply_filter(delta, path.c);
        for (std::size_t t = 0; t < 200; ++t) {
            CHECK(std::fabs(eta[t] - path.eta[t]) < 1e-9);
            CHECK(std::fabs(eps[t] - path.eps[t]) < 1e-9);
        }
        CHECK(path.x[0] == path.eta[0]);
        CHECK(path.c[0] == path.eps[0]);
    }
    SUBCASE("zero shocks leave the deterministic path") {
        Params th = gdp_like();
        th.sigma_eta2 = 0.0;
        th.sigma_eps2 = 0.0;
        th.sigma_eta_eps = 0.0;
        const auto path = simulate(th, spec_p(1), 30, 1);
        for (std::size_t t = 0; t < 30; ++t) CHECK(path.y[t] == path.deterministic[t]);
    }
    SUBCASE("a random trend alone") {
        Params th = gdp_like();
        th.sigma_eta2 = 0.0;
        th.sigma_eta_eps = 0.0;
        const auto path = simulate(th, spec_p(1), 30, 1);
        for (double e : path.eta) CHECK(e == 0.0);
    }
    SUBCASE("reproducible given the seed") {
        const auto a = simulate(gdp_like(), spec_p(1), 80, 123);
        const auto b = simulate(gdp_like(), spec_p(1), 80, 123);
        const auto c = simulate(gdp_like(), spec_p(1), 80, 124);
        CHECK(a.y == b.y);
        CHECK(a.eps == b.eps);
        CHECK(a.y != c.y);
        CHECK(a.seed == 123);
    }
    SUBCASE("input errors") {
        Params th = gdp_like();
        th.sigma_eta_eps = -2.0;
        CHECK_THROWS_AS((void)simulate(th, spec_p(1), 20, 1), ValidationError);
        CHECK_THROWS_AS((void)simulate(gdp_like(), spec_p(2), 20, 1), ValidationError);
        CHECK_THROWS_AS((void)simulate(gdp_like(), spec_p(1), 0, 1), ValidationError);
    }
}

TEST_CASE("simulated moments") {
    SUBCASE("shock correlation in a long sample") {
        Params th;
        th.d = 1.0;
        th.phi = {};
        th.sigma_eta2 = 0.5;
        th.sigma_eps2 = 2.0;
        th.sigma_eta_eps = -0.6;
        const std::size_t n = 100000;
        const auto path = simulate(th, spec_p(0), n, 77);
        double see = 0.0, suu = 0.0, seu = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            see += path.eta[t] * path.eta[t];
            suu += path.eps[t] * path.eps[t];
            seu += path.eta[t] * path.eps[t];
        }
        CHECK(std::fabs(seu / std::sqrt(see * suu) - th.rho()) < 0.02);

        std::vector<double> dy(n - 1);
        for (std::size_t t = 1; t < n; ++t) dy[t - 1] = path.y[t] - path.y[t - 1];
        const double gamma0 = th.sigma_eta2 + 2.0 * th.sigma_eps2 + 2.0 * th.sigma_eta_eps;
        const std::size_t blocks = 100, len = dy.size() / blocks;
        std::vector<double> vars;
        for (std::size_t b = 0; b < blocks; ++b) {
            std::vector<double> blk(dy.begin() + static_cast<long>(b * len),
                                    dy.begin() + static_cast<long>((b + 1) * len));
            const double m = sample_mean(blk);
            double s = 0.0;
            for (double v : blk) s += (v - m) * (v - m);
            vars.push_back(s / static_cast<double>(len - 1));
        }
        const double mv = sample_mean(vars);
        double sv = 0.0;
        for (double v : vars) sv += (v - mv) * (v - mv);
        const double se = std::sqrt(sv / static_cast<double>(blocks - 1) / static_cast<double>(blocks));
        CHECK(std::fabs(mv - gamma0) < 3.0 * se);
    }
    SUBCASE("reduced-form autocovariances at the industrial-production estimates") {
        Params th;
        th.d = 1.66;
        th.phi = {0.80};
        th.sigma_eta2 = 0.14;
        th.sigma_eta_eps = -0.45;
        th.sigma_eps2 = 1.71;
        th.mu0 = 2.0;
        th.mu1 = 0.1;
        const std::size_t n = 100, reps = 4000, J = 3;
        const auto delta = fracops::frac_ar_expand(th.d, phi_with_one(th), n - 1);
        std::vector<std::vector<double>> prods(J + 1);
        for (std::size_t r = 0; r < reps; ++r) {
            const auto path = simulate(th, spec_p(1), n, 1000 + r);
            std::vector<double> u(n);
            for (std::size_t t = 0; t < n; ++t) u[t] = path.y[t] - path.deterministic[t];
            const auto z = fracops::apply_filter(delta, fracops::fracdiff(u, th.d));
            for (std::size_t j = 0; j <= J; ++j) prods[j].push_back(z[n - 1] * z[n - 1 - j]);
        }
        const auto gamma = autocov_reduced(th, J, n);
        for (std::size_t j = 0; j <= J; ++j) {
            const double m = sample_mean(prods[j]);
            double s = 0.0;
            for (double v : prods[j]) s += (v - m) * (v - m);
            const double se = std::sqrt(s / static_cast<double>(reps - 1) / static_cast<double>(reps));
            CHECK(std::fabs(m - gamma[j]) < 3.0 * se);
        }
    }
}

TEST_CASE("Monte Carlo harness") {
    SUBCASE("summary arithmetic") {
        const std::vector<std::string> names{"a", "b"};
        const std::vector<double> truth{1.0, 0.0};
        const auto same = summarise(names, truth, {{1.5, 2.0}, {1.5, 2.0}});
        CHECK(same[0].sd == 0.0);
        CHECK(same[0].bias == doctest::Approx(0.5));
        CHECK(same[0].rmse == doctest::Approx(0.5));
        CHECK(same[1].count == 2);
        const auto mixed = summarise(names, truth, {{1.0, 1.0}, {}, {3.0, -1.0}});
        CHECK(mixed[0].count == 2);
        CHECK(mixed[0].mean == doctest::Approx(2.0));
        CHECK(mixed[0].sd == doctest::Approx(std::sqrt(2.0)));
        CHECK(mixed[0].rmse == doctest::Approx(std::sqrt(2.0)));
        CHECK(mixed[1].mean == doctest::Approx(0.0));
    }

    const CoeffMap map = build_coeff_map(make_d_grid(1.0, 1.6, 0.05), 4, 4, 60);
    MonteCarloOptions opts;
    opts.reps = 3;
    opts.seed = 5;
    opts.estimate.starts = 3;
    opts.estimate.fine_restarts = 1;
    opts.threads = 1;
    ModelSpec dgp = spec_p(1);
    dgp.v = 4;
    dgp.w = 4;

    SUBCASE("deterministic and thread independent") {
        const auto a = monte_carlo(gdp_like(), dgp, 60, map, opts);
        opts.threads = 2;
        const auto b = monte_carlo(gdp_like(), dgp, 60, map, opts);
        REQUIRE(a.estimates.size() == 3);
        CHECK(a.estimates == b.estimates);
        CHECK(a.failure_rate == 0.0);
        CHECK(a.names.front() == "d");
        CHECK(a.summary.front().truth == 1.32);
        CHECK(a.summary.front().count == 3);
        for (const auto& s : a.summary) CHECK(std::isfinite(s.rmse));
    }
    SUBCASE("restricted fit on the same draws") {
        ModelSpec tc = dgp;
        tc.d_free = false;
        tc.d_fixed = 1.0;
        opts.fit_spec = tc;
        const auto r = monte_carlo(gdp_like(), dgp, 60, map, opts);
        CHECK(r.names.front() == "phi1");
        CHECK(r.summary[1].name == "sigma_eta2");
        CHECK(r.summary[1].truth == 0.36);
    }
    SUBCASE("failures are recorded") {
        opts.estimate.starts = 0;
        const auto r = monte_carlo(gdp_like(), dgp, 60, map, opts);
        CHECK(r.failure_rate == 1.0);
        CHECK(r.failures.size() == 3);
        CHECK(r.summary.front().count == 0);
        CHECK(std::isnan(r.summary.front().mean));
    }
    SUBCASE("needs two reps") {
        opts.reps = 1;
        CHECK_THROWS_AS((void)monte_carlo(gdp_like(), dgp, 60, map, opts), ValidationError);
    }
}
