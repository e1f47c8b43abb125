#include "fracuc/fracops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fracuc/error.hpp"

namespace fracuc::fracops {

namespace {

void require_finite(double d) {
    if (!std::isfinite(d)) {
        throw ValidationError("fractional order must be finite");
    }
}

void require_length(std::size_t n) {
    if (n == 0) {
        throw ValidationError("coefficient length must be at least 1");
    }
}

}  // namespace

CoeffSeq pi_coeffs(double d, std::size_t n) {
    require_finite(d);
    require_length(n);
    CoeffSeq out(n);
    out[0] = 1.0;
    for (std::size_t j = 1; j < n; ++j) {
        const auto jd = static_cast<double>(j);
        out[j] = (jd - d - 1.0) / jd * out[j - 1];
    }
    return out;
}

CoeffSeq phi_int_coeffs(double d, std::size_t n) {
    require_finite(d);
    require_length(n);
    CoeffSeq out(n);
    out[0] = 1.0;
    for (std::size_t j = 1; j < n; ++j) {
        const auto jd = static_cast<double>(j);
        out[j] = (jd + d - 1.0) / jd * out[j - 1];
    }
    return out;
}

std::vector<double> apply_filter(std::span<const double> weights, std::span<const double> series) {
    std::vector<double> out(series.size(), 0.0);
    for (std::size_t t = 0; t < series.size(); ++t) {
        const std::size_t lags = std::min(t + 1, weights.size());
        double acc = 0.0;
        for (std::size_t j = 0; j < lags; ++j) {
            acc += weights[j] * series[t - j];
        }
        out[t] = acc;
    }
    return out;
}

std::vector<double> fracdiff(std::span<const double> series, double d) {
    if (series.empty()) {
        throw ValidationError("fracdiff: empty series");
    }
    const CoeffSeq w = pi_coeffs(d, series.size());
    return apply_filter(w, series);
}

CoeffSeq convolve(std::span<const double> a, std::span<const double> b, std::size_t n) {
    CoeffSeq out(n, 0.0);
    for (std::size_t i = 0; i < std::min(a.size(), n); ++i) {
        if (a[i] == 0.0) continue;
        const std::size_t jmax = std::min(b.size(), n - i);
        for (std::size_t j = 0; j < jmax; ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

std::vector<CoeffSeq> varsigma_table(double d, std::size_t kmax, std::size_t n) {
    require_length(n);
    std::vector<CoeffSeq> table;
    table.reserve(kmax);
    if (kmax == 0) return table;

    // L_d = -sum_{j>=1} pi_j(d) L^j
    CoeffSeq lag = pi_coeffs(d, n);
    lag[0] = 0.0;
    for (std::size_t j = 1; j < n; ++j) lag[j] = -lag[j];

    table.push_back(lag);
    for (std::size_t k = 2; k <= kmax; ++k) {
        table.push_back(convolve(table.back(), lag, n));
    }
    return table;
}

CoeffSeq varsigma_coeffs(double d, std::size_t k, std::size_t n) {
    if (k == 0) {
        throw ValidationError("varsigma_coeffs: power k must be at least 1");
    }
    if (n < k) {
        throw ValidationError("varsigma_coeffs: length must be at least k");
    }
    return varsigma_table(d, k, n).back();
}

CoeffSeq frac_ar_expand(double d, std::span<const double> phi, std::size_t l) {
    if (phi.empty()) {
        throw ValidationError("frac_ar_expand: phi must contain the leading 1");
    }
    const std::size_t p = phi.size() - 1;
    if (l < p) {
        throw ValidationError("frac_ar_expand: truncation lag " + std::to_string(l) +
                              " below AR order " + std::to_string(p));
    }
    CoeffSeq delta(l + 1, 0.0);
    delta[0] = 1.0;
    if (p == 0) return delta;

    const auto powers = varsigma_table(d, p, l + 1);
    for (std::size_t k = 1; k <= p; ++k) {
        for (std::size_t j = 0; j <= l; ++j) {
            delta[j] -= phi[k] * powers[k - 1][j];
        }
    }
    return delta;
}

CoeffSeq invert_ar(std::span<const double> delta, std::size_t n) {
    if (delta.empty() || delta[0] != 1.0) {
        throw ValidationError("invert_ar: delta[0] must equal 1");
    }
    require_length(n);
    CoeffSeq omega(n, 0.0);
    omega[0] = 1.0;
    for (std::size_t j = 1; j < n; ++j) {
        const std::size_t kmax = std::min(j, delta.size() - 1);
        double acc = 0.0;
        for (std::size_t k = 1; k <= kmax; ++k) {
            acc -= delta[k] * omega[j - k];
        }
        omega[j] = acc;
    }
    return omega;
}

}  // namespace fracuc::fracops
