#include "fracuc/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <thread>

#include "fracuc/error.hpp"
#include "fracuc/fracops.hpp"
#include "fracuc/rng.hpp"

namespace fracuc {

namespace {

void check_inputs(const Params& theta, const ModelSpec& spec, std::size_t n) {
    if (n == 0) throw ValidationError("simulate: n must be positive");
    if (theta.phi.size() != spec.p) throw ValidationError("simulate: phi has the wrong length for p");
    if (spec.break_index.has_value() != theta.mu_break.has_value()) {
        throw ValidationError("simulate: break slope present/absent inconsistently with the spec");
    }
    const double vals[] = {theta.d, theta.sigma_eta2, theta.sigma_eta_eps, theta.sigma_eps2,
                           theta.mu0, theta.mu1, theta.mu_break.value_or(0.0)};
    for (double v : vals) {
        if (!std::isfinite(v)) throw ValidationError("simulate: non-finite parameter");
    }
    for (double v : theta.phi) {
        if (!std::isfinite(v)) throw ValidationError("simulate: non-finite AR coefficient");
    }
    const double det = theta.sigma_eta2 * theta.sigma_eps2 - theta.sigma_eta_eps * theta.sigma_eta_eps;
    const double scale = theta.sigma_eta2 * theta.sigma_eps2;
    if (theta.sigma_eta2 < 0.0 || theta.sigma_eps2 < 0.0 || det < -1e-12 * std::max(scale, 1e-300)) {
        throw ValidationError("simulate: shock covariance matrix is not positive semidefinite");
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

SimPath simulate(const Params& theta, const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
    check_inputs(theta, spec, n);
    SimPath out;
    out.seed = seed;
    out.params = theta;
    out.spec = spec;
    out.spec.n = n;

    const double l11 = std::sqrt(theta.sigma_eta2);
    const double l21 = l11 > 0.0 ? theta.sigma_eta_eps / l11 : 0.0;
    const double l22 = std::sqrt(std::max(0.0, theta.sigma_eps2 - l21 * l21));

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    out.eta.resize(n);
    out.eps.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double z1 = normal(rng);
        const double z2 = normal(rng);
        out.eta[t] = l11 * z1;
        out.eps[t] = l21 * z1 + l22 * z2;
    }

    out.x = fracops::fracdiff(out.eta, -theta.d);

    std::vector<double> phi1{1.0};
    phi1.insert(phi1.end(), theta.phi.begin(), theta.phi.end());
    const auto delta = fracops::frac_ar_expand(theta.d, phi1, n - 1);
    std::size_t order = delta.size() - 1;
    while (order > 0 && delta[order] == 0.0) --order;
    out.c.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = out.eps[t];
        const std::size_t jmax = std::min(t, order);
        for (std::size_t j = 1; j <= jmax; ++j) acc -= delta[j] * out.c[t - j];
        out.c[t] = acc;
    }

    out.deterministic = deterministic_path(theta, out.spec);
    out.y.resize(n);
    for (std::size_t t = 0; t < n; ++t) out.y[t] = out.deterministic[t] + out.x[t] + out.c[t];
    return out;
}

std::vector<ParamSummary> summarise(const std::vector<std::string>& names,
                                    const std::vector<double>& truth,
                                    const std::vector<std::vector<double>>& estimates) {
    std::vector<ParamSummary> out(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        ParamSummary& s = out[i];
        s.name = names[i];
        s.truth = truth[i];
        std::vector<double> vals;
        for (const auto& e : estimates) {
            if (e.size() == names.size()) vals.push_back(e[i]);
        }
        s.count = vals.size();
        if (vals.empty()) {
            s.mean = s.bias = s.sd = s.rmse = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        s.mean = mean_of(vals);
        s.bias = s.mean - s.truth;
        double ss = 0.0, se = 0.0;
        for (double v : vals) {
            ss += (v - s.mean) * (v - s.mean);
            se += (v - s.truth) * (v - s.truth);
        }
        s.sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
        s.rmse = std::sqrt(se / static_cast<double>(vals.size()));
    }
    return out;
}

MonteCarloResult monte_carlo(const Params& theta, const ModelSpec& spec, std::size_t n,
                             const CoeffMap& map, const MonteCarloOptions& opts) {
    if (opts.reps < 2) throw ValidationError("monte_carlo: reps must be at least 2");
    ModelSpec dgp = spec;
    dgp.n = n;
    check_inputs(theta, dgp, n);
    ModelSpec fit_spec = opts.fit_spec.value_or(dgp);
    fit_spec.n = n;
    fit_spec.validate();

    const ParamCodec fit_codec(fit_spec);
    const ParamCodec dgp_codec(dgp);
    MonteCarloResult res;
    res.reps = opts.reps;
    res.names = fit_codec.names();

    std::map<std::string, double> dgp_values;
    {
        const auto names = dgp_codec.names();
        const auto vals = dgp_codec.natural(theta);
        for (std::size_t i = 0; i < names.size(); ++i) dgp_values[names[i]] = vals[i];
        if (!dgp.d_free) dgp_values["d"] = theta.d;
        if (!dgp.drift) dgp_values["mu1"] = 0.0;
    }
    std::vector<double> truth;
    for (const auto& name : res.names) {
        auto it = dgp_values.find(name);
        truth.push_back(it != dgp_values.end() ? it->second : 0.0);
    }

    res.estimates.assign(opts.reps, {});
    res.loglik.assign(opts.reps, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> errors(opts.reps);

    EstimateOptions eopts = opts.estimate;
    eopts.threads = 1;
    auto run_rep = [&](std::size_t r) {
        try {
            const auto path = simulate(theta, dgp, n, sub_seed(opts.seed, 2 * r));
            EstimateOptions local = eopts;
            local.seed = sub_seed(opts.seed, 2 * r + 1);
            const auto fit = estimate(fit_spec, path.y, map, local);
            res.estimates[r] = fit.estimates;
            res.loglik[r] = fit.loglik;
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    };

    unsigned workers = opts.threads != 0 ? opts.threads
                                         : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, opts.reps));
    if (workers <= 1) {
        for (std::size_t r = 0; r < opts.reps; ++r) run_rep(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < opts.reps; r = next++) run_rep(r);
            });
        }
        for (auto& t : pool) t.join();
    }

    std::size_t failed = 0;
    for (std::size_t r = 0; r < opts.reps; ++r) {
        if (!errors[r].empty()) {
            ++failed;
            res.failures.push_back("rep " + std::to_string(r) + ": " + errors[r]);
        }
    }
    res.failure_rate = static_cast<double>(failed) / static_cast<double>(opts.reps);
    res.summary = summarise(res.names, truth, res.estimates);
    return res;
}

}  // namespace fracuc
