#include <cmath>
#include <vector>

#include "doctest.h"
#include "fracuc/arma_map.hpp"
#include "fracuc/fracops.hpp"

using namespace fracuc;

TEST_CASE("arma_wold") {
    CHECK(arma_wold({}, {}, 3) == std::vector<double>{1, 0, 0});
    CHECK(arma_wold(std::vector<double>{1.0}, {}, 4) == std::vector<double>{1, 1, 1, 1});
    const auto b = arma_wold(std::vector<double>{0.5}, std::vector<double>{0.2}, 3);
    CHECK(b[0] == 1.0);
    CHECK(b[1] == doctest::Approx(0.7));
    CHECK(b[2] == doctest::Approx(0.35));
}

TEST_CASE("fit_arma_approx exact cases") {
    const auto rw = fit_arma_approx(1.0, 1, 0, 100);
    REQUIRE(rw.ar.size() == 1);
    CHECK(rw.ar[0] == 1.0);
    CHECK(rw.fit_mse == 0.0);

    const auto zero = fit_arma_approx(0.0, 3, 2, 50);
    for (double a : zero.ar) CHECK(a == 0.0);
    for (double m : zero.ma) CHECK(m == 0.0);
    CHECK(zero.fit_mse == 0.0);

    const auto i2 = exact_integer_arma(2, 4, 4, 60);
    CHECK(i2.ar[0] == 2.0);
    CHECK(i2.ar[1] == -1.0);
    CHECK(i2.fit_mse < 1e-20);
}

TEST_CASE("fit_arma_approx d=0.75 ARMA(4,4) on 232 lags") {
    const auto fit = fit_arma_approx(0.75, 4, 4, 232);
    MESSAGE("fit_mse(0.75) = " << fit.fit_mse);
    CHECK(fit.fit_mse < 1e-6);
    // independent check of the reported criterion
    const auto target = fracops::phi_int_coeffs(0.75, 232);
    const auto b = arma_wold(fit.ar, fit.ma, 232);
    double sse = 0.0;
    for (std::size_t j = 0; j < 232; ++j) sse += (target[j] - b[j]) * (target[j] - b[j]);
    CHECK(sse / 232.0 == doctest::Approx(fit.fit_mse).epsilon(1e-9));
}

TEST_CASE("richer ARMA family never fits worse") {
    for (double d : {0.6, 1.3}) {
        const auto small = fit_arma_approx(d, 2, 2, 150);
        const auto big = fit_arma_approx(d, 4, 4, 150);
        CHECK(big.fit_mse <= small.fit_mse * (1.0 + 1e-9));
    }
}

TEST_CASE("natural cubic spline") {
    NaturalCubicSpline s({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 8.0, 27.0});
    CHECK(s(1.0) == 1.0);
    CHECK(s(2.0) == 8.0);
    // linear data is reproduced exactly between knots
    NaturalCubicSpline lin({0.0, 0.5, 1.5, 2.0}, {1.0, 2.0, 4.0, 5.0});
    CHECK(lin(1.0) == doctest::Approx(3.0));
    CHECK(lin(0.1) == doctest::Approx(1.2));
}

TEST_CASE("coefficient map") {
    const auto grid = make_d_grid(0.8, 1.05, 0.05);
    REQUIRE(grid.size() == 6);
    CHECK(grid[4] == 1.0);
    const CoeffMap map = build_coeff_map(grid, 4, 4, 120);

    SUBCASE("knots reproduce their fits") {
        for (const auto& k : map.knots()) {
            const auto e = map.evaluate(k.d);
            for (std::size_t i = 0; i < 4; ++i) {
                CHECK(std::fabs(e.ar[i] - k.ar[i]) < 1e-8);
                CHECK(std::fabs(e.ma[i] - k.ma[i]) < 1e-8);
            }
            CHECK(arma_fit_error(k.d, k.ar, k.ma, 120) == doctest::Approx(k.fit_mse).epsilon(1e-9));
        }
    }
    SUBCASE("d = 1 reproduces the random-walk kernel") {
        const auto e = map.evaluate(1.0);
        const auto b = arma_wold(e.ar, e.ma, 120);
        for (double bj : b) CHECK(std::fabs(bj - 1.0) < 1e-6);
    }
    SUBCASE("midpoint interpolation stays accurate") {
        const auto e = map.evaluate(0.875);
        const double knot_mse = std::max(map.knots()[1].fit_mse, map.knots()[2].fit_mse);
        MESSAGE("midpoint mse " << e.fit_mse << " knot mse " << knot_mse);
        CHECK(e.fit_mse < 10.0 * knot_mse);
    }
    SUBCASE("continuity") {
        const auto a = map.evaluate(0.9);
        const auto b = map.evaluate(0.9 + 1e-4);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(a.ar[i] - b.ar[i]) < 1e-2);
        const auto wa = arma_wold(a.ar, a.ma, 120);
        const auto wb = arma_wold(b.ar, b.ma, 120);
        for (std::size_t j = 0; j < 120; ++j) CHECK(std::fabs(wa[j] - wb[j]) < 1e-3);
    }
    SUBCASE("polish never does worse than the raw spline") {
        for (double d : {0.81, 0.93, 1.02}) {
            const auto raw = map.spline_coefficients(d);
            const double raw_mse = arma_fit_error(
                d, std::span<const double>(raw.data(), 4), std::span<const double>(raw.data() + 4, 4), 120);
            CHECK(map.evaluate(d).fit_mse <= raw_mse);
        }
    }
    SUBCASE("outside the grid is an error") {
        CHECK_THROWS_AS((void)map.evaluate(0.7), ValidationError);
        CHECK_THROWS_AS((void)map.evaluate(1.2), ValidationError);
    }
}
