#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fracuc/arma_map.hpp"
#include "fracuc/error.hpp"
#include "fracuc/inference.hpp"
#include "fracuc/io.hpp"
#include "fracuc/reduced.hpp"
#include "fracuc/rng.hpp"
#include "fracuc/simulate.hpp"

namespace fracuc::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Grid {
    double lo = 0.5, hi = 2.5, step = 0.05;
};

Grid parse_grid(const std::string& s) {
    Grid g;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> g.lo >> c1 >> g.hi >> c2 >> g.step) || c1 != ':' || c2 != ':' || !in.eof()) {
        throw ValidationError("--grid expects lo:hi:step, got '" + s + "'");
    }
    if (!(g.lo >= 0.0 && g.hi > g.lo && g.step > 0.0)) throw ValidationError("--grid needs 0 <= lo < hi and step > 0");
    return g;
}

json grid_json(const Grid& g) { return json{{"lo", g.lo}, {"hi", g.hi}, {"step", g.step}}; }

Grid grid_from_json(const json& j) {
    return Grid{j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("step").get<double>()};
}

std::optional<fs::path> cache_dir(const std::string& flag) {
    if (!flag.empty()) return fs::path(flag);
    if (const char* env = std::getenv("FRACUC_CACHE_DIR"); env != nullptr && *env != '\0') return fs::path(env);
    return std::nullopt;
}

CoeffMap obtain_map(const Grid& g, std::size_t v, std::size_t w, std::size_t n, const std::string& cache_flag,
                    std::ostream& err) {
    const auto dir = cache_dir(cache_flag);
    fs::path file;
    if (dir) {
        char name[160];
        std::snprintf(name, sizeof name, "coeffmap-v%zu-w%zu-n%zu-%.4f-%.4f-%.4f.json", v, w, n, g.lo, g.hi, g.step);
        file = *dir / name;
        std::ifstream in(file);
        if (in) {
            try {
                return coeff_map_from_json(json::parse(in));
            } catch (const std::exception& e) {
                err << "fracuc: ignoring unreadable cache " << file.string() << " (" << e.what() << ")\n";
            }
        }
    }
    const auto grid = make_d_grid(g.lo, g.hi, g.step);
    err << "fracuc: fitting ARMA(" << v << "," << w << ") map on " << grid.size() << " grid points, n = " << n << "\n";
    CoeffMap map = build_coeff_map(grid, v, w, n);
    if (dir) {
        fs::create_directories(*dir);
        const fs::path tmp = file.string() + ".tmp";
        {
            std::ofstream o(tmp);
            o << coeff_map_to_json(map).dump(1) << '\n';
            if (!o) throw ValidationError("cannot write cache file " + tmp.string());
        }
        fs::rename(tmp, file);
    }
    return map;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream o(path);
    if (!o) throw ValidationError("cannot open '" + path + "' for writing");
    o << text;
    if (!o) throw ValidationError("write to '" + path + "' failed");
}

void write_json(const std::string& path, const json& doc, std::ostream& out) {
    write_text(path, doc.dump(2) + "\n", out);
}

/// CSV outputs carry their metadata in a sidecar next to the file.
void write_sidecar(const std::string& csv_path, const json& meta) {
    if (csv_path.empty() || csv_path == "-") return;
    std::ofstream o(csv_path + ".meta.json");
    if (!o) throw ValidationError("cannot write '" + csv_path + ".meta.json'");
    o << meta.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

std::string join_args(const std::vector<std::string>& args) {
    std::string s = "fracuc";
    for (const auto& a : args) s += " " + a;
    return s;
}

json tolerances(const EstimateOptions& o) {
    return json{{"coarse_rel_tol", o.coarse_rel_tol}, {"coarse_max_iter", o.coarse_max_iter},
                {"fine_rel_tol", o.fine_rel_tol},     {"fine_max_iter", o.fine_max_iter},
                {"fine_restarts", o.fine_restarts},   {"hessian_step", o.hessian_step},
                {"max_abs_atanh_rho", o.max_abs_atanh_rho}};
}

json base_metadata(const std::vector<std::string>& args, const std::string& command) {
    return json{{"software", "fracuc"}, {"version", FRACUC_VERSION}, {"command", command},
                {"argv", join_args(args)}, {"rng", kRngName}};
}

json data_block(const Dataset& d) {
    return json{{"source", d.source},
                {"column", d.column},
                {"frequency", frequency_name(d.frequency)},
                {"start", period_label(d.dates.front(), d.frequency)},
                {"end", period_label(d.dates.back(), d.frequency)},
                {"n", d.values.size()},
                {"transform", {{"log", d.transform.log}, {"scale", d.transform.scale}}}};
}

struct DataOptions {
    std::string input, column, start, end;
    bool log = false;
    double scale = 1.0;
};

void add_data_options(CLI::App* cmd, DataOptions& o, bool input_required = true) {
    auto* in = cmd->add_option("--input", o.input, "CSV file with a date column");
    if (input_required) in->required();
    cmd->add_option("--column", o.column, "value column (default: the only non-date column)");
    cmd->add_flag("--log", o.log, "take natural logs before scaling");
    cmd->add_option("--scale", o.scale, "multiply the (logged) values by this factor");
    cmd->add_option("--start", o.start, "first period to use, e.g. 1961Q1");
    cmd->add_option("--end", o.end, "last period to use, e.g. 2018Q4");
}

Dataset load_data(const DataOptions& o) {
    const auto raw = ingest(o.input, o.column.empty() ? std::nullopt : std::optional<std::string>(o.column),
                            Transform{o.log, o.scale});
    return slice(raw, o.start.empty() ? std::nullopt : std::optional<std::string>(o.start),
                 o.end.empty() ? std::nullopt : std::optional<std::string>(o.end));
}

struct FitOptions {
    DataOptions data;
    std::string p = "auto";
    std::size_t pmax = 4;
    std::string d = "free";
    std::string model = "ft-fc";
    std::string brk;
    bool no_drift = false;
    std::size_t v = 4, w = 4, l = 10;
    std::string grid = "0.5:2.5:0.05";
    std::size_t starts = 100;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string route = "exact";
    bool no_se = false;
    std::string out;
    std::string cache;
};

struct EstimationFlags {
    std::size_t starts = 100;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string route = "exact";
};

void apply_d_choice(ModelSpec& spec, const std::string& d, const std::string& model, bool d_given) {
    if (model != "ft-fc" && model != "tc") throw ValidationError("--model must be ft-fc or tc");
    std::string choice = d;
    if (model == "tc") {
        if (d_given && d != "fixed=1" && d != "fixed=1.0") {
            throw ValidationError("--model tc fixes d at 1 and conflicts with --d " + d);
        }
        choice = "fixed=1";
    }
    if (choice == "free") {
        spec.d_free = true;
        return;
    }
    if (choice.rfind("fixed=", 0) == 0) {
        spec.d_free = false;
        try {
            std::size_t pos = 0;
            const std::string num = choice.substr(6);
            spec.d_fixed = std::stod(num, &pos);
            if (pos != num.size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw ValidationError("--d fixed=VALUE needs a number, got '" + choice + "'");
        }
        if (!(spec.d_fixed > 0.0)) throw ValidationError("--d fixed value must be positive");
        return;
    }
    throw ValidationError("--d must be 'free' or 'fixed=VALUE'");
}

int cmd_fit(const FitOptions& o, bool d_given, const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
    const Dataset data = load_data(o.data);
    const Grid grid = parse_grid(o.grid);
    const std::size_t n = data.values.size();

    ModelSpec spec;
    spec.drift = !o.no_drift;
    spec.v = o.v;
    spec.w = o.w;
    spec.l = o.l;
    spec.n = n;
    apply_d_choice(spec, o.d, o.model, d_given);
    if (!o.brk.empty()) spec.break_index = break_index(data, o.brk);
    std::optional<std::size_t> fixed_p;
    if (o.p != "auto") {
        try {
            std::size_t pos = 0;
            const long v = std::stol(o.p, &pos);
            if (pos != o.p.size() || v < 0) throw std::invalid_argument("p");
            fixed_p = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ValidationError("--p must be 'auto' or a non-negative integer");
        }
    }
    spec.p = fixed_p.value_or(0);
    spec.validate();

    EstimateOptions eopts;
    eopts.starts = o.starts;
    eopts.seed = o.seed;
    eopts.threads = o.threads;
    eopts.route = parse_route(o.route);
    eopts.std_errors = !o.no_se;

    const CoeffMap map = obtain_map(grid, o.v, o.w, n, o.cache, err);

    json selection = json::array();
    FitResult fit;
    if (fixed_p) {
        err << "fracuc: estimating p = " << *fixed_p << " with " << o.starts << " starts\n";
        fit = estimate(spec, data.values, map, eopts);
        selection.push_back({{"p", fit.spec.p}, {"loglik", fit.loglik}, {"bic", fit.bic}});
    } else {
        err << "fracuc: selecting p in 0.." << o.pmax << " by BIC with " << o.starts << " starts each\n";
        const auto sel = select_p(data.values, spec, o.pmax, map, eopts);
        for (const auto& f : sel.fits) {
            selection.push_back({{"p", f.spec.p}, {"loglik", f.loglik}, {"bic", f.bic}});
            if (f.spec.p == sel.p) fit = f;
        }
        for (const auto& msg : sel.failures) selection.push_back({{"failure", msg}});
    }

    json break_test = nullptr;
    if (spec.break_index) {
        ModelSpec restricted = fit.spec;
        restricted.break_index.reset();
        EstimateOptions ropts = eopts;
        ropts.std_errors = false;
        err << "fracuc: fitting the model without the break for the LR test\n";
        const auto r = estimate(restricted, data.values, map, ropts);
        const double lr = 2.0 * (fit.loglik - r.loglik);
        break_test = json{{"break", o.brk},
                          {"loglik_unrestricted", fit.loglik},
                          {"loglik_restricted", r.loglik},
                          {"lr", lr},
                          {"df", 1},
                          {"p_value", lr_test(r.loglik, fit.loglik, 1)}};
    }

    json meta = base_metadata(args, "fit");
    meta["seed"] = o.seed;
    meta["starts"] = o.starts;
    meta["route"] = route_name(eopts.route);
    meta["tolerances"] = tolerances(eopts);
    meta["approximation"] = {{"v", o.v}, {"w", o.w}, {"l", o.l}};
    meta["grid"] = grid_json(grid);
    meta["pmax"] = o.pmax;
    meta["threads"] = o.threads;

    json doc{{"metadata", meta}, {"data", data_block(data)}, {"selection", selection}, {"fit", to_json(fit)},
             {"break_test", break_test}};
    write_json(o.out, doc, out);
    return kExitOk;
}

struct DecomposeOptions {
    std::string fit, out, plot, cache;
    DataOptions data;
};

int cmd_decompose(const DecomposeOptions& o, CLI::App* cmd, const std::vector<std::string>& args,
                  std::ostream& out, std::ostream& err) {
    const json doc = read_json_file(o.fit);
    const json& fitj = doc.at("fit");
    const ModelSpec spec = spec_from_json(fitj.at("spec"));
    const Params theta = params_from_json(fitj.at("params"));
    const json& dj = doc.at("data");

    DataOptions d = o.data;
    if (cmd->count("--column") == 0) d.column = dj.at("column").get<std::string>();
    if (cmd->count("--log") == 0) d.log = dj.at("transform").at("log").get<bool>();
    if (cmd->count("--scale") == 0) d.scale = dj.at("transform").at("scale").get<double>();
    if (cmd->count("--start") == 0) d.start = dj.at("start").get<std::string>();
    if (cmd->count("--end") == 0) d.end = dj.at("end").get<std::string>();
    const Dataset data = load_data(d);
    if (data.values.size() != spec.n) {
        throw ValidationError("the data have " + std::to_string(data.values.size()) + " observations but the fit used " +
                              std::to_string(spec.n));
    }
    const Grid grid = grid_from_json(doc.at("metadata").at("grid"));
    const CoeffMap map = obtain_map(grid, spec.v, spec.w, spec.n, o.cache, err);
    const Decomposition dec = decompose(theta, spec, data.values, map);

    std::ostringstream csv;
    csv << std::setprecision(17) << "date,y,trend,cycle,correction_x,correction_c,deterministic\n";
    for (std::size_t t = 0; t < spec.n; ++t) {
        csv << period_iso(data.dates[t], data.frequency) << ',' << dec.y[t] << ',' << dec.trend[t] << ','
            << dec.cycle[t] << ',' << dec.correction_x[t] << ',' << dec.correction_c[t] << ','
            << dec.deterministic[t] << '\n';
    }
    write_text(o.out, csv.str(), out);

    json meta = base_metadata(args, "decompose");
    meta["fit_file"] = o.fit;
    meta["fit_metadata"] = doc.at("metadata");
    meta["approximation"] = {{"v", spec.v}, {"w", spec.w}, {"l", spec.l}};
    meta["grid"] = grid_json(grid);
    meta["data"] = data_block(data);
    meta["loglik_corrected_filter"] = dec.loglik;
    write_sidecar(o.out, meta);

    if (!o.plot.empty()) {
        std::ostringstream tidy;
        tidy << std::setprecision(17) << "date,series,value\n";
        const std::pair<const char*, const std::vector<double>*> series[] = {
            {"y", &dec.y}, {"trend", &dec.trend}, {"cycle", &dec.cycle}, {"deterministic", &dec.deterministic}};
        for (const auto& [name, vals] : series) {
            for (std::size_t t = 0; t < spec.n; ++t) {
                tidy << period_iso(data.dates[t], data.frequency) << ',' << name << ',' << (*vals)[t] << '\n';
            }
        }
        write_text(o.plot, tidy.str(), out);
        write_sidecar(o.plot, meta);
    }
    return kExitOk;
}

/// Parameters and spec from a fit document, or from a bare {"params", "spec"} document.
std::pair<Params, ModelSpec> model_from_doc(const json& doc) {
    const json& src = doc.contains("fit") ? doc.at("fit") : doc;
    return {params_from_json(src.at("params")), spec_from_json(src.at("spec"))};
}

struct SimulateOptions {
    std::string params, out, start, frequency;
    std::size_t n = 0;
    std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    const json doc = read_json_file(o.params);
    auto [theta, spec] = model_from_doc(doc);
    const std::size_t n = o.n != 0 ? o.n : spec.n;
    if (n == 0) throw ValidationError("--n is required when the parameter file has no sample length");
    if (spec.break_index && *spec.break_index > n) throw ValidationError("break index lies beyond --n");
    Frequency f = Frequency::Quarterly;
    std::string start = "2000Q1";
    if (doc.contains("data")) {
        f = parse_frequency(doc["data"].at("frequency").get<std::string>());
        start = doc["data"].at("start").get<std::string>();
    }
    if (!o.frequency.empty()) f = parse_frequency(o.frequency);
    if (!o.start.empty()) start = o.start;
    const auto path = simulate(theta, spec, n, o.seed);
    std::ostringstream csv;
    write_sim_csv(csv, path, parse_period(start, f), f);
    write_text(o.out, csv.str(), out);

    json meta = base_metadata(args, "simulate");
    meta["seed"] = o.seed;
    meta["n"] = n;
    meta["params"] = to_json(theta);
    meta["spec"] = to_json(path.spec);
    meta["start"] = start;
    meta["frequency"] = frequency_name(f);
    write_sidecar(o.out, meta);
    return kExitOk;
}

struct McOptions {
    std::string params, out, fit_model = "same", grid, route = "exact", cache;
    std::size_t n = 0, reps = 100, starts = 20, fine_restarts = 4;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

int cmd_mc(const McOptions& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const json doc = read_json_file(o.params);
    auto [theta, spec] = model_from_doc(doc);
    const std::size_t n = o.n != 0 ? o.n : spec.n;
    if (n == 0) throw ValidationError("--n is required when the parameter file has no sample length");
    spec.n = n;
    Grid grid;
    if (!o.grid.empty()) {
        grid = parse_grid(o.grid);
    } else if (doc.contains("metadata") && doc["metadata"].contains("grid")) {
        grid = grid_from_json(doc["metadata"]["grid"]);
    }

    MonteCarloOptions mopts;
    mopts.reps = o.reps;
    mopts.seed = o.seed;
    mopts.threads = o.threads;
    mopts.estimate.starts = o.starts;
    mopts.estimate.fine_restarts = o.fine_restarts;
    mopts.estimate.route = parse_route(o.route);
    mopts.estimate.std_errors = false;
    if (o.fit_model == "tc") {
        ModelSpec tc = spec;
        tc.d_free = false;
        tc.d_fixed = 1.0;
        mopts.fit_spec = tc;
    } else if (o.fit_model == "ft-fc") {
        ModelSpec ft = spec;
        ft.d_free = true;
        mopts.fit_spec = ft;
    } else if (o.fit_model != "same") {
        throw ValidationError("--fit-model must be same, ft-fc or tc");
    }

    const CoeffMap map = obtain_map(grid, spec.v, spec.w, n, o.cache, err);
    err << "fracuc: " << o.reps << " replications, n = " << n << ", " << o.starts << " starts each\n";
    const auto mc = monte_carlo(theta, spec, n, map, mopts);

    json meta = base_metadata(args, "mc");
    meta["seed"] = o.seed;
    meta["seed_rule"] = "rep r: path sub_seed(seed, 2r), starts sub_seed(seed, 2r+1), SplitMix64";
    meta["tolerances"] = tolerances(mopts.estimate);
    meta["starts"] = o.starts;
    meta["route"] = route_name(mopts.estimate.route);
    meta["approximation"] = {{"v", spec.v}, {"w", spec.w}, {"l", spec.l}};
    meta["grid"] = grid_json(grid);
    json doc_out{{"metadata", meta},
                 {"dgp", {{"params", to_json(theta)}, {"spec", to_json(spec)}}},
                 {"fit_spec", to_json(mopts.fit_spec.value_or(spec))},
                 {"result", to_json(mc)}};
    write_json(o.out, doc_out, out);
    return kExitOk;
}

struct GphOptions {
    DataOptions data;
    double alpha = 0.65;
    bool levels = false;
    std::string out;
};

int cmd_gph(const GphOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    const Dataset data = load_data(o.data);
    const auto g = gph_estimate(data.values, o.alpha, o.levels ? GphInput::Levels : GphInput::Differenced);
    json meta = base_metadata(args, "gph");
    meta["alpha"] = o.alpha;
    json doc{{"metadata", meta}, {"data", data_block(data)}, {"gph", to_json(g)}};
    write_json(o.out, doc, out);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fractional trend-cycle decomposition", "fracuc"};
    app.set_version_flag("--version", std::string("fracuc ") + FRACUC_VERSION);
    app.require_subcommand(1);

    FitOptions fo;
    auto* fit = app.add_subcommand("fit", "estimate the model by maximum likelihood");
    add_data_options(fit, fo.data);
    fit->add_option("--p", fo.p, "cycle AR order or 'auto' for BIC selection")->capture_default_str();
    fit->add_option("--pmax", fo.pmax, "largest p tried by 'auto'")->capture_default_str();
    auto* d_opt = fit->add_option("--d", fo.d, "'free' or 'fixed=VALUE'")->capture_default_str();
    fit->add_option("--model", fo.model, "ft-fc (fractional) or tc (d fixed at 1)")->capture_default_str();
    fit->add_option("--break", fo.brk, "period from which the drift changes, e.g. 1973Q1");
    fit->add_flag("--no-drift", fo.no_drift, "drop the linear drift");
    fit->add_option("--v", fo.v, "AR order of the trend approximation")->capture_default_str();
    fit->add_option("--w", fo.w, "MA order of the trend approximation")->capture_default_str();
    fit->add_option("--l", fo.l, "cycle truncation lag")->capture_default_str();
    fit->add_option("--grid", fo.grid, "d grid of the coefficient map, lo:hi:step")->capture_default_str();
    fit->add_option("--starts", fo.starts, "random starting values")->capture_default_str();
    fit->add_option("--seed", fo.seed, "seed for the starting values")->capture_default_str();
    fit->add_option("--threads", fo.threads, "worker threads, 0 for all cores")->capture_default_str();
    fit->add_option("--route", fo.route, "likelihood: exact, exact-ar or corrected")->capture_default_str();
    fit->add_flag("--no-se", fo.no_se, "skip standard errors");
    fit->add_option("--out", fo.out, "output JSON (default stdout)");
    fit->add_option("--cache-dir", fo.cache, "coefficient map cache (default $FRACUC_CACHE_DIR)");

    DecomposeOptions dopt;
    auto* dec = app.add_subcommand("decompose", "filtered trend and cycle at fitted parameters");
    dec->add_option("--fit", dopt.fit, "JSON written by fit")->required();
    add_data_options(dec, dopt.data);
    dec->add_option("--out", dopt.out, "output CSV (default stdout)");
    dec->add_option("--plot", dopt.plot, "tidy CSV with date,series,value");
    dec->add_option("--cache-dir", dopt.cache, "coefficient map cache (default $FRACUC_CACHE_DIR)");

    SimulateOptions so;
    auto* sim = app.add_subcommand("simulate", "draw a path from fitted or given parameters");
    sim->add_option("--params", so.params, "fit JSON or {params, spec} JSON")->required();
    sim->add_option("--n", so.n, "length (default: the fitted sample length)");
    sim->add_option("--seed", so.seed, "random seed")->capture_default_str();
    sim->add_option("--start", so.start, "first period label");
    sim->add_option("--frequency", so.frequency, "quarterly or monthly");
    sim->add_option("--out", so.out, "output CSV (default stdout)");

    McOptions mo;
    auto* mc = app.add_subcommand("mc", "Monte Carlo of the estimator");
    mc->add_option("--params", mo.params, "fit JSON or {params, spec} JSON")->required();
    mc->add_option("--n", mo.n, "sample length (default: the fitted one)");
    mc->add_option("--reps", mo.reps, "replications")->capture_default_str();
    mc->add_option("--seed", mo.seed, "master seed")->capture_default_str();
    mc->add_option("--starts", mo.starts, "starting values per replication")->capture_default_str();
    mc->add_option("--fine-restarts", mo.fine_restarts, "simplex restarts in the second stage")->capture_default_str();
    mc->add_option("--fit-model", mo.fit_model, "same, ft-fc or tc")->capture_default_str();
    mc->add_option("--grid", mo.grid, "d grid of the coefficient map, lo:hi:step");
    mc->add_option("--route", mo.route, "likelihood route")->capture_default_str();
    mc->add_option("--threads", mo.threads, "worker threads, 0 for all cores")->capture_default_str();
    mc->add_option("--out", mo.out, "output JSON (default stdout)");
    mc->add_option("--cache-dir", mo.cache, "coefficient map cache (default $FRACUC_CACHE_DIR)");

    GphOptions go;
    auto* gph = app.add_subcommand("gph", "log-periodogram estimate of d");
    add_data_options(gph, go.data);
    gph->add_option("--alpha", go.alpha, "bandwidth exponent")->capture_default_str();
    gph->add_flag("--levels", go.levels, "regress on levels instead of first differences plus one");
    gph->add_option("--out", go.out, "output JSON (default stdout)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (app.got_subcommand(fit)) return cmd_fit(fo, d_opt->count() > 0, args, out, err);
        if (app.got_subcommand(dec)) return cmd_decompose(dopt, dec, args, out, err);
        if (app.got_subcommand(sim)) return cmd_simulate(so, args, out);
        if (app.got_subcommand(mc)) return cmd_mc(mo, args, out, err);
        if (app.got_subcommand(gph)) return cmd_gph(go, args, out);
    } catch (const NumericalError& e) {
        err << "fracuc: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ValidationError& e) {
        err << "fracuc: " << e.what() << '\n';
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        err << "fracuc: malformed JSON input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const fs::filesystem_error& e) {
        err << "fracuc: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "fracuc: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitValidation;
}

}  // namespace fracuc::cli
