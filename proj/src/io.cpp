#include "fracuc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <regex>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>
#include <boost/tokenizer.hpp>

#include "fracuc/error.hpp"

namespace fracuc {

namespace {

using nlohmann::json;

int subs_per_year(Frequency f) noexcept { return f == Frequency::Quarterly ? 4 : 12; }

std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
    using Sep = boost::escaped_list_separator<char>;
    std::vector<std::string> out;
    try {
        boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
        for (const auto& cell : tok) out.push_back(boost::algorithm::trim_copy(cell));
    } catch (const boost::escaped_list_error& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": malformed CSV (" + e.what() + ")");
    }
    return out;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// (year, month) from a date cell, or (year, quarter) when the cell is a quarter label.
struct RawDate {
    int year = 0, sub = 0;
    bool is_quarter = false;
};

std::optional<RawDate> parse_raw_date(const std::string& s) {
    static const std::regex ymd(R"((\d{4})-(\d{1,2})(?:-(\d{1,2}))?)");
    static const std::regex yq(R"((\d{4})(?:Q|:|-Q)([1-4]))", std::regex::icase);
    std::smatch m;
    if (std::regex_match(s, m, ymd)) {
        const int month = std::stoi(m[2]);
        if (month < 1 || month > 12) return std::nullopt;
        if (m[3].matched) {
            const int day = std::stoi(m[3]);
            if (day < 1 || day > 31) return std::nullopt;
        }
        return RawDate{std::stoi(m[1]), month, false};
    }
    if (std::regex_match(s, m, yq)) return RawDate{std::stoi(m[1]), std::stoi(m[2]), true};
    return std::nullopt;
}

Period to_period(const RawDate& r, Frequency f) {
    if (r.is_quarter) return {r.year, r.sub};
    return f == Frequency::Quarterly ? Period{r.year, (r.sub - 1) / 3 + 1} : Period{r.year, r.sub};
}

json nan_as_null(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return a;
}

json num_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

Period next_period(Period p, Frequency f) noexcept {
    if (++p.sub > subs_per_year(f)) {
        p.sub = 1;
        ++p.year;
    }
    return p;
}

long periods_between(Period a, Period b, Frequency f) noexcept {
    const long k = subs_per_year(f);
    return (static_cast<long>(b.year) * k + b.sub) - (static_cast<long>(a.year) * k + a.sub);
}

std::string period_label(Period p, Frequency f) {
    std::ostringstream s;
    if (f == Frequency::Quarterly) {
        s << p.year << 'Q' << p.sub;
    } else {
        s << p.year << '-' << std::setw(2) << std::setfill('0') << p.sub;
    }
    return s.str();
}

std::string period_iso(Period p, Frequency f) {
    const int month = f == Frequency::Quarterly ? 3 * (p.sub - 1) + 1 : p.sub;
    std::ostringstream s;
    s << std::setw(4) << std::setfill('0') << p.year << '-' << std::setw(2) << month << "-01";
    return s.str();
}

Period parse_period(const std::string& text, Frequency f) {
    const auto raw = parse_raw_date(boost::algorithm::trim_copy(text));
    if (!raw) throw ValidationError("cannot parse date '" + text + "'");
    if (raw->is_quarter && f == Frequency::Monthly) {
        throw ValidationError("quarter label '" + text + "' used with monthly data");
    }
    return to_period(*raw, f);
}

const char* frequency_name(Frequency f) noexcept {
    return f == Frequency::Quarterly ? "quarterly" : "monthly";
}

Frequency parse_frequency(const std::string& s) {
    if (s == "quarterly") return Frequency::Quarterly;
    if (s == "monthly") return Frequency::Monthly;
    throw ValidationError("unknown frequency '" + s + "'");
}

Dataset read_dataset(std::istream& in, const std::optional<std::string>& column,
                     const Transform& transform, const std::string& source) {
    if (!(transform.scale > 0.0) || !std::isfinite(transform.scale)) {
        throw ValidationError("scale must be positive");
    }
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        header = split_csv(line, line_no);
        break;
    }
    if (header.empty()) throw ValidationError(source + ": no header row");

    std::size_t date_col = 0;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "date" || header[i] == "DATE" || header[i] == "observation_date") {
            date_col = i;
            break;
        }
    }
    std::size_t value_col = header.size();
    if (column) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i != date_col && header[i] == *column) value_col = i;
        }
        if (value_col == header.size()) throw ValidationError(source + ": no column named '" + *column + "'");
    } else {
        if (header.size() != 2) {
            throw ValidationError(source + ": " + std::to_string(header.size()) +
                                  " columns; choose one with --column");
        }
        value_col = 1 - date_col;
    }

    struct Row {
        RawDate date;
        double value;
        std::size_t line;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (boost::algorithm::trim_copy(line).empty() || line[0] == '#') continue;
        const auto cells = split_csv(line, line_no);
        if (cells.size() != header.size()) {
            throw ValidationError(source + " line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " cells, found " +
                                  std::to_string(cells.size()));
        }
        const auto date = parse_raw_date(cells[date_col]);
        if (!date) {
            throw ValidationError(source + " line " + std::to_string(line_no) + ": cannot parse date '" +
                                  cells[date_col] + "'");
        }
        const std::string& cell = cells[value_col];
        if (cell.empty() || cell == "." || cell == "NA" || cell == "NaN") {
            throw ValidationError(source + " line " + std::to_string(line_no) + ": missing value in column '" +
                                  header[value_col] + "'");
        }
        const auto v = parse_number(cell);
        if (!v) {
            throw ValidationError(source + " line " + std::to_string(line_no) + ": non-numeric value '" +
                                  cell + "' in column '" + header[value_col] + "'");
        }
        rows.push_back({*date, *v, line_no});
    }
    if (rows.size() < 2) throw ValidationError(source + ": need at least two observations");

    Frequency freq = Frequency::Quarterly;
    if (rows[0].date.is_quarter) {
        freq = Frequency::Quarterly;
    } else {
        const long gap = std::labs((rows[1].date.year - rows[0].date.year) * 12L + (rows[1].date.sub - rows[0].date.sub));
        if (gap == 1) {
            freq = Frequency::Monthly;
        } else if (gap == 3) {
            freq = Frequency::Quarterly;
        } else {
            throw ValidationError(source + " lines " + std::to_string(rows[0].line) + "-" +
                                  std::to_string(rows[1].line) +
                                  ": first two dates are neither one month nor one quarter apart");
        }
    }

    Dataset data;
    data.frequency = freq;
    data.column = header[value_col];
    data.source = source;
    data.transform = transform;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Period p = to_period(rows[i].date, freq);
        if (!data.dates.empty()) {
            const Period prev = data.dates.back();
            const long step = periods_between(prev, p, freq);
            const std::string where = source + " line " + std::to_string(rows[i].line);
            if (step == 0) {
                throw ValidationError(where + ": duplicate date " + period_label(p, freq) +
                                      " (also on line " + std::to_string(rows[i - 1].line) + ")");
            }
            if (step < 0) {
                throw ValidationError(where + ": date " + period_label(p, freq) + " precedes " +
                                      period_label(prev, freq));
            }
            if (step > 1) {
                throw ValidationError(where + ": gap after line " + std::to_string(rows[i - 1].line) +
                                      ", missing " + period_label(next_period(prev, freq), freq) +
                                      (step > 2 ? " and " + std::to_string(step - 2) + " more" : ""));
            }
        }
        double v = rows[i].value;
        if (transform.log) {
            if (!(v > 0.0)) {
                throw ValidationError(source + " line " + std::to_string(rows[i].line) +
                                      ": cannot take the log of " + std::to_string(v));
            }
            v = std::log(v);
        }
        data.dates.push_back(p);
        data.values.push_back(v * transform.scale);
    }
    return data;
}

Dataset ingest(const std::string& path, const std::optional<std::string>& column, const Transform& transform) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_dataset(in, column, transform, path);
}

Dataset slice(const Dataset& data, const std::optional<std::string>& start, const std::optional<std::string>& end) {
    auto locate = [&](const std::string& label) {
        const Period p = parse_period(label, data.frequency);
        auto it = std::find(data.dates.begin(), data.dates.end(), p);
        if (it == data.dates.end()) {
            throw ValidationError("date " + label + " is outside " + period_label(data.dates.front(), data.frequency) +
                                  " to " + period_label(data.dates.back(), data.frequency));
        }
        return static_cast<std::size_t>(it - data.dates.begin());
    };
    const std::size_t a = start ? locate(*start) : 0;
    const std::size_t b = end ? locate(*end) : data.dates.size() - 1;
    if (b < a) throw ValidationError("sample end precedes its start");
    Dataset out = data;
    out.dates.assign(data.dates.begin() + static_cast<long>(a), data.dates.begin() + static_cast<long>(b + 1));
    out.values.assign(data.values.begin() + static_cast<long>(a), data.values.begin() + static_cast<long>(b + 1));
    return out;
}

std::size_t break_index(const Dataset& data, const std::string& label) {
    const Period p = parse_period(label, data.frequency);
    auto it = std::find(data.dates.begin(), data.dates.end(), p);
    if (it == data.dates.end()) {
        throw ValidationError("break date " + label + " is not in the sample " +
                              period_label(data.dates.front(), data.frequency) + " to " +
                              period_label(data.dates.back(), data.frequency));
    }
    return static_cast<std::size_t>(it - data.dates.begin()) + 1;
}

json to_json(const Params& th) {
    json j{{"d", th.d},
           {"phi", th.phi},
           {"sigma_eta2", th.sigma_eta2},
           {"sigma_eta_eps", th.sigma_eta_eps},
           {"sigma_eps2", th.sigma_eps2},
           {"rho", num_or_null(th.rho())},
           {"mu0", th.mu0},
           {"mu1", th.mu1}};
    j["mu_break"] = th.mu_break ? json(*th.mu_break) : json(nullptr);
    return j;
}

json to_json(const ModelSpec& s) {
    json j{{"p", s.p}, {"d_free", s.d_free}, {"d_fixed", s.d_fixed}, {"drift", s.drift},
           {"v", s.v},  {"w", s.w},           {"l", s.l},             {"n", s.n}};
    j["break_index"] = s.break_index ? json(*s.break_index) : json(nullptr);
    return j;
}

json to_json(const EstimateOptions& o) {
    return json{{"starts", o.starts},
                {"seed", o.seed},
                {"coarse_rel_tol", o.coarse_rel_tol},
                {"coarse_max_iter", o.coarse_max_iter},
                {"fine_rel_tol", o.fine_rel_tol},
                {"fine_max_iter", o.fine_max_iter},
                {"fine_restarts", o.fine_restarts},
                {"route", route_name(o.route)},
                {"hessian_step", o.hessian_step},
                {"max_abs_atanh_rho", o.max_abs_atanh_rho},
                {"std_errors", o.std_errors}};
}

json to_json(const FitResult& f) {
    json est = json::array();
    for (std::size_t i = 0; i < f.names.size(); ++i) {
        est.push_back({{"name", f.names[i]},
                       {"estimate", f.estimates[i]},
                       {"std_error", num_or_null(i < f.std_errors.size() ? f.std_errors[i]
                                                                         : std::numeric_limits<double>::quiet_NaN())}});
    }
    return json{{"spec", to_json(f.spec)},
                {"params", to_json(f.params)},
                {"loglik", f.loglik},
                {"bic", f.bic},
                {"k", f.k},
                {"estimates", est},
                {"hessian_pd", f.hessian_pd},
                {"converged", f.converged},
                {"n_starts", f.n_starts},
                {"n_starts_used", f.n_starts_used},
                {"stage1_loglik", num_or_null(f.stage1_loglik)},
                {"stage2_iterations", f.stage2_iterations}};
}

json to_json(const MonteCarloResult& mc) {
    json rows = json::array();
    for (const auto& s : mc.summary) {
        rows.push_back({{"name", s.name},
                        {"truth", s.truth},
                        {"mean", num_or_null(s.mean)},
                        {"bias", num_or_null(s.bias)},
                        {"sd", num_or_null(s.sd)},
                        {"rmse", num_or_null(s.rmse)},
                        {"count", s.count}});
    }
    json reps = json::array();
    for (std::size_t r = 0; r < mc.estimates.size(); ++r) {
        reps.push_back({{"rep", r},
                        {"estimates", mc.estimates[r].empty() ? json(nullptr) : nan_as_null(mc.estimates[r])},
                        {"loglik", num_or_null(mc.loglik[r])}});
    }
    return json{{"reps", mc.reps},
                {"names", mc.names},
                {"summary", rows},
                {"failure_rate", mc.failure_rate},
                {"failures", mc.failures},
                {"replications", reps}};
}

json to_json(const GphResult& g) {
    return json{{"d_hat", g.d_hat},
                {"se", g.se},
                {"se_asymptotic", g.se_asymptotic},
                {"m", g.m},
                {"input", g.input == GphInput::Levels ? "levels" : "differenced"}};
}

Params params_from_json(const json& j) {
    try {
        Params th;
        th.d = j.at("d").get<double>();
        th.phi = j.at("phi").get<std::vector<double>>();
        th.sigma_eta2 = j.at("sigma_eta2").get<double>();
        th.sigma_eta_eps = j.at("sigma_eta_eps").get<double>();
        th.sigma_eps2 = j.at("sigma_eps2").get<double>();
        th.mu0 = j.value("mu0", 0.0);
        th.mu1 = j.value("mu1", 0.0);
        if (j.contains("mu_break") && !j["mu_break"].is_null()) th.mu_break = j["mu_break"].get<double>();
        return th;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed parameter block: ") + e.what());
    }
}

ModelSpec spec_from_json(const json& j) {
    try {
        ModelSpec s;
        s.p = j.at("p").get<std::size_t>();
        s.d_free = j.at("d_free").get<bool>();
        s.d_fixed = j.value("d_fixed", 1.0);
        s.drift = j.value("drift", true);
        s.v = j.value("v", std::size_t{4});
        s.w = j.value("w", std::size_t{4});
        s.l = j.value("l", std::size_t{10});
        s.n = j.value("n", std::size_t{0});
        if (j.contains("break_index") && !j["break_index"].is_null()) {
            s.break_index = j["break_index"].get<std::size_t>();
        }
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model block: ") + e.what());
    }
}

json coeff_map_to_json(const CoeffMap& map) {
    json knots = json::array();
    for (const auto& k : map.knots()) {
        knots.push_back({{"d", k.d}, {"ar", k.ar}, {"ma", k.ma}, {"fit_mse", k.fit_mse}});
    }
    return json{{"format", "fracuc-coeffmap"},
                {"version", 1},
                {"v", map.v()},
                {"w", map.w()},
                {"n", map.horizon()},
                {"grid", map.grid()},
                {"knots", knots}};
}

CoeffMap coeff_map_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "fracuc-coeffmap" || j.at("version").get<int>() != 1) {
            throw ValidationError("unsupported coefficient map document");
        }
        const auto v = j.at("v").get<std::size_t>();
        const auto w = j.at("w").get<std::size_t>();
        const auto n = j.at("n").get<std::size_t>();
        std::vector<ArmaApprox> knots;
        for (const auto& k : j.at("knots")) {
            ArmaApprox a;
            a.d = k.at("d").get<double>();
            a.ar = k.at("ar").get<std::vector<double>>();
            a.ma = k.at("ma").get<std::vector<double>>();
            a.fit_mse = k.at("fit_mse").get<double>();
            a.n = n;
            knots.push_back(std::move(a));
        }
        return CoeffMap(std::move(knots), v, w, n);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed coefficient map: ") + e.what());
    }
}

void write_sim_csv(std::ostream& out, const SimPath& path, Period start, Frequency f) {
    out << "date,y,x,c,eta,eps,deterministic\n";
    out << std::setprecision(17);
    Period p = start;
    for (std::size_t t = 0; t < path.y.size(); ++t) {
        out << period_iso(p, f) << ',' << path.y[t] << ',' << path.x[t] << ',' << path.c[t] << ','
            << path.eta[t] << ',' << path.eps[t] << ',' << path.deterministic[t] << '\n';
        p = next_period(p, f);
    }
}

}  // namespace fracuc
