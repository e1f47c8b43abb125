#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fracuc/error.hpp"
#include "fracuc/fracops.hpp"

using namespace fracuc;
using namespace fracuc::fracops;

namespace {

void check_seq(const std::vector<double>& got, const std::vector<double>& want, double tol = 1e-14) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(std::fabs(got[i] - want[i]) <= tol);
    }
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

// L_d^k = sum_i binom(k, i) (-1)^i (1-L)^{i d}: an independent route to varsigma
std::vector<double> varsigma_binomial(double d, std::size_t k, std::size_t n) {
    std::vector<double> out(n, 0.0);
    double binom = 1.0;
    for (std::size_t i = 0; i <= k; ++i) {
        if (i > 0) binom = binom * static_cast<double>(k - i + 1) / static_cast<double>(i);
        const auto w = pi_coeffs(static_cast<double>(i) * d, n);
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t j = 0; j < n; ++j) out[j] += sign * binom * w[j];
    }
    return out;
}

}  // namespace

TEST_CASE("pi_coeffs") {
    check_seq(pi_coeffs(1.0, 4), {1, -1, 0, 0});
    check_seq(pi_coeffs(0.0, 3), {1, 0, 0});
    check_seq(pi_coeffs(0.5, 3), {1, -0.5, -0.125});
    CHECK_THROWS_AS((void)pi_coeffs(0.3, 0), ValidationError);
    CHECK_THROWS_AS((void)pi_coeffs(std::nan(""), 3), ValidationError);
}

TEST_CASE("phi_int_coeffs") {
    check_seq(phi_int_coeffs(1.0, 4), {1, 1, 1, 1});
    check_seq(phi_int_coeffs(0.5, 3), {1, 0.5, 0.375});
    const auto a = pi_coeffs(0.7, 20);
    const auto b = phi_int_coeffs(0.7, 20);
    const auto c = convolve(a, b, 20);
    CHECK(c[0] == doctest::Approx(1.0));
    for (std::size_t j = 1; j < c.size(); ++j) CHECK(std::fabs(c[j]) < 1e-15);
}

TEST_CASE("fracdiff") {
    check_seq(fracdiff(std::vector<double>{5, 5, 5}, 0.0), {5, 5, 5});
    check_seq(fracdiff(std::vector<double>{1, 2, 3}, 1.0), {1, 1, 1});
    check_seq(fracdiff(std::vector<double>{1, 2, 3}, 0.4), {1, 1.6, 2.08}, 1e-13);
    CHECK_THROWS_AS((void)fracdiff(std::vector<double>{}, 0.4), ValidationError);
}

TEST_CASE("frac_ar_expand") {
    check_seq(frac_ar_expand(0.8, std::vector<double>{1.0}, 3), {1, 0, 0, 0});
    check_seq(frac_ar_expand(1.0, std::vector<double>{1.0, 0.6}, 2), {1, -0.6, 0});
    check_seq(frac_ar_expand(0.5, std::vector<double>{1.0, 0.8}, 2), {1, -0.4, -0.1});
    CHECK_THROWS_AS((void)frac_ar_expand(0.5, std::vector<double>{1.0, 0.3, 0.2}, 1),
                    ValidationError);
}

TEST_CASE("invert_ar") {
    check_seq(invert_ar(std::vector<double>{1.0}, 3), {1, 0, 0});
    check_seq(invert_ar(std::vector<double>{1.0, -0.5}, 3), {1, 0.5, 0.25});
    check_seq(invert_ar(std::vector<double>{1.0, -0.4, -0.1}, 3), {1, 0.4, 0.26});
}

TEST_CASE("varsigma_coeffs") {
    const double d = 0.37;
    const auto s1 = varsigma_coeffs(d, 1, 6);
    const auto pi = pi_coeffs(d, 6);
    CHECK(s1[0] == 0.0);
    for (std::size_t i = 1; i < 6; ++i) CHECK(s1[i] == doctest::Approx(-pi[i]));

    check_seq(varsigma_coeffs(1.0, 2, 4), {0, 0, 1, 0});
    check_seq(varsigma_coeffs(0.5, 2, 3), {0, 0, 0.25});
    CHECK_THROWS_AS((void)varsigma_coeffs(0.5, 0, 3), ValidationError);

    // leading weight of L_d^k is d^k and everything below lag k vanishes
    const auto s3 = varsigma_coeffs(1.4, 3, 8);
    CHECK(s3[0] == 0.0);
    CHECK(s3[1] == 0.0);
    CHECK(s3[2] == 0.0);
    CHECK(s3[3] == doctest::Approx(std::pow(1.4, 3)));
}

TEST_CASE("operator identities over random draws") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> ud(-2.0, 3.0);
    std::uniform_int_distribution<std::size_t> un(1, 512);
    double worst_conv = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const double d = ud(rng);
        const std::size_t n = un(rng);
        const auto phi = phi_int_coeffs(d, n);
        const auto c = convolve(pi_coeffs(d, n), phi, n);
        std::vector<double> impulse(n, 0.0);
        impulse[0] = 1.0;
        double scale = 1.0;
        for (double v : phi) scale = std::max(scale, std::fabs(v));
        worst_conv = std::max(worst_conv, max_abs_diff(c, impulse) / scale);
    }
    CHECK(worst_conv < 1e-12);

    std::uniform_real_distribution<double> upos(0.05, 2.5);
    std::normal_distribution<double> norm;
    for (int rep = 0; rep < 50; ++rep) {
        const double d = upos(rng);
        std::vector<double> x(120);
        for (double& v : x) v = norm(rng);
        const auto back = fracdiff(fracdiff(x, d), -d);
        CHECK(max_abs_diff(back, x) < 1e-10);
    }

    for (int rep = 0; rep < 50; ++rep) {
        const double d = upos(rng);
        const std::size_t k = 1 + rep % 5;
        const std::size_t n = 40 + static_cast<std::size_t>(rep);
        CHECK(max_abs_diff(varsigma_coeffs(d, k, n), varsigma_binomial(d, k, n)) < 1e-12);
    }
}

TEST_CASE("pi weights are negative and their partial sums approach zero for d in (0,1)") {
    for (double d : {0.1, 0.45, 0.9}) {
        const auto w = pi_coeffs(d, 4000);
        double partial = 1.0;
        double prev = partial;
        for (std::size_t j = 1; j < w.size(); ++j) {
            CHECK(w[j] < 0.0);
            partial += w[j];
            CHECK(partial < prev);
            CHECK(partial > 0.0);
            prev = partial;
        }
        CHECK(partial < 0.5);
    }
}
