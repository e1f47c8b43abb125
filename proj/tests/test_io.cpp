#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "fracuc/error.hpp"
#include "fracuc/io.hpp"

using namespace fracuc;

namespace {

Dataset read(const std::string& text, const std::optional<std::string>& column = std::nullopt,
             Transform tr = {}) {
    std::istringstream in(text);
    return read_dataset(in, column, tr, "t.csv");
}

std::string error_of(const std::string& text, const std::optional<std::string>& column = std::nullopt) {
    try {
        (void)read(text, column);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("calendar periods") {
    CHECK(next_period({1973, 4}, Frequency::Quarterly) == Period{1974, 1});
    CHECK(next_period({1973, 12}, Frequency::Monthly) == Period{1974, 1});
    CHECK(periods_between({1961, 1}, {2018, 4}, Frequency::Quarterly) == 231);
    CHECK(period_label({1973, 1}, Frequency::Quarterly) == "1973Q1");
    CHECK(period_label({1973, 2}, Frequency::Monthly) == "1973-02");
    CHECK(period_iso({1973, 3}, Frequency::Quarterly) == "1973-07-01");
    CHECK(parse_period("1973Q1", Frequency::Quarterly) == Period{1973, 1});
    CHECK(parse_period("1973:3", Frequency::Quarterly) == Period{1973, 3});
    CHECK(parse_period("1973-10-01", Frequency::Quarterly) == Period{1973, 4});
    CHECK(parse_period("1973-10", Frequency::Monthly) == Period{1973, 10});
    CHECK_THROWS_AS((void)parse_period("1973Q5", Frequency::Quarterly), ValidationError);
    CHECK_THROWS_AS((void)parse_period("1973Q1", Frequency::Monthly), ValidationError);
    CHECK(parse_frequency(frequency_name(Frequency::Monthly)) == Frequency::Monthly);
}

TEST_CASE("CSV ingest") {
    SUBCASE("FRED layout with log and scale") {
        const auto d = read("observation_date,GDPC1\n1961-01-01,3493.703\n1961-04-01,3553.021\n1961-07-01,3621.252\n",
                            std::nullopt, {true, 100.0});
        REQUIRE(d.values.size() == 3);
        CHECK(d.frequency == Frequency::Quarterly);
        CHECK(d.column == "GDPC1");
        CHECK(d.values[0] == doctest::Approx(100.0 * std::log(3493.703)).epsilon(1e-15));
        CHECK(d.values[2] == doctest::Approx(100.0 * std::log(3621.252)).epsilon(1e-15));
        CHECK(d.dates[1] == Period{1961, 2});
        CHECK(d.transform.log);
    }
    SUBCASE("a full quarterly sample has 232 rows") {
        std::ostringstream s;
        s << "DATE,v\n";
        Period p{1961, 1};
        for (int i = 0; i < 232; ++i) {
            s << period_iso(p, Frequency::Quarterly) << "," << 1000 + i << "\n";
            p = next_period(p, Frequency::Quarterly);
        }
        const auto d = read(s.str());
        CHECK(d.values.size() == 232);
        CHECK(period_label(d.dates.back(), Frequency::Quarterly) == "2018Q4");
        CHECK(break_index(d, "1973Q1") == 49);
        CHECK(break_index(d, "1961Q1") == 1);
        CHECK_THROWS_AS((void)break_index(d, "2019Q1"), ValidationError);
        const auto cut = slice(d, std::string("1970Q1"), std::string("1979Q4"));
        CHECK(cut.values.size() == 40);
        CHECK(cut.values.front() == 1036.0);
    }
    SUBCASE("monthly data, quoted cells, comments and a named column") {
        const auto d = read("# comment\n\"date\",a,b\n2001-11-01,\"1.5\",7\n2001-12-01,2.5,8\n2002-01-01,3.5,9\n",
                            std::string("b"));
        CHECK(d.frequency == Frequency::Monthly);
        CHECK(d.values == std::vector<double>{7, 8, 9});
    }
    SUBCASE("quarter labels") {
        const auto d = read("date,v\n1999Q4,1\n2000Q1,2\n");
        CHECK(d.dates[1] == Period{2000, 1});
    }
    SUBCASE("errors name the line") {
        const std::string gap = error_of("date,v\n1973-01-01,1\n1973-04-01,2\n1973-10-01,3\n");
        CHECK(contains(gap, "line 4"));
        CHECK(contains(gap, "missing 1973Q3"));
        const std::string dup = error_of("date,v\n1973-01-01,1\n1973-04-01,2\n1973-04-01,3\n");
        CHECK(contains(dup, "line 4"));
        CHECK(contains(dup, "duplicate date 1973Q2"));
        const std::string bad = error_of("date,v\n1973-01-01,1\n1973-04-01,abc\n");
        CHECK(contains(bad, "line 3"));
        CHECK(contains(bad, "non-numeric value 'abc'"));
        CHECK(contains(error_of("date,v\n1973-01-01,1\n1973-04-01,.\n"), "missing value"));
        CHECK(contains(error_of("date,v\n1973-01-01,1\n1972-10-01,2\n"), "precedes"));
        CHECK(contains(error_of("date,v\n1973-01-01,1\nxx,2\n"), "cannot parse date 'xx'"));
        CHECK(contains(error_of("date,a,b\n1973-01-01,1,2\n1973-04-01,2,3\n"), "--column"));
        CHECK(contains(error_of("date,a\n1973-01-01,1\n1973-04-01,2\n", std::string("z")), "no column named 'z'"));
        CHECK(contains(error_of("date,v\n1973-01-01,1\n1973-04-01\n"), "expected 2 cells"));
        CHECK(contains(error_of("date,v\n1973-01-01,1\n1973-03-01,2\n"), "neither"));
        std::istringstream neg("date,v\n1973-01-01,1\n1973-04-01,-2\n");
        CHECK_THROWS_AS((void)read_dataset(neg, std::nullopt, {true, 1.0}), ValidationError);
        CHECK_THROWS_AS((void)ingest("/nonexistent/file.csv", std::nullopt, {}), ValidationError);
    }
}

TEST_CASE("JSON documents") {
    SUBCASE("parameters and spec round trip") {
        Params th;
        th.d = 1.32;
        th.phi = {0.68, -0.1};
        th.sigma_eta2 = 0.36;
        th.sigma_eta_eps = -0.6;
        th.sigma_eps2 = 1.06;
        th.mu0 = 800.123456789012345;
        th.mu1 = 0.8;
        th.mu_break = -0.2;
        const auto back = params_from_json(nlohmann::json::parse(to_json(th).dump()));
        CHECK(back.d == th.d);
        CHECK(back.phi == th.phi);
        CHECK(back.mu0 == th.mu0);
        CHECK(back.mu_break == th.mu_break);
        ModelSpec s;
        s.p = 2;
        s.d_free = false;
        s.d_fixed = 1.0;
        s.break_index = 49;
        s.n = 232;
        s.l = 25;
        const auto sb = spec_from_json(nlohmann::json::parse(to_json(s).dump()));
        CHECK(sb.p == 2);
        CHECK_FALSE(sb.d_free);
        CHECK(sb.break_index == std::optional<std::size_t>(49));
        CHECK(sb.l == 25);
        CHECK(sb.n == 232);
        CHECK_THROWS_AS((void)params_from_json(nlohmann::json{{"d", 1.0}}), ValidationError);
    }
    SUBCASE("coefficient map cache") {
        const auto map = build_coeff_map(make_d_grid(1.0, 1.3, 0.1), 2, 2, 40);
        const auto back = coeff_map_from_json(nlohmann::json::parse(coeff_map_to_json(map).dump()));
        CHECK(back.grid() == map.grid());
        CHECK(back.v() == 2);
        CHECK(back.horizon() == 40);
        for (double d : {1.0, 1.15, 1.27}) {
            const auto a = map.evaluate(d), b = back.evaluate(d);
            CHECK(a.ar == b.ar);
            CHECK(a.ma == b.ma);
        }
        auto bad = coeff_map_to_json(map);
        bad["version"] = 9;
        CHECK_THROWS_AS((void)coeff_map_from_json(bad), ValidationError);
    }
}

TEST_CASE("simulated paths read back through ingest") {
    Params th;
    th.d = 1.4;
    th.phi = {0.5};
    th.sigma_eta2 = 0.5;
    th.sigma_eta_eps = -0.2;
    th.sigma_eps2 = 1.0;
    th.mu0 = 3.0;
    th.mu1 = 0.1;
    ModelSpec spec;
    spec.p = 1;
    const auto path = simulate(th, spec, 50, 3);
    std::stringstream csv;
    write_sim_csv(csv, path, {1990, 3}, Frequency::Quarterly);
    const auto y = read_dataset(csv, std::string("y"), {}, "sim");
    REQUIRE(y.values.size() == 50);
    CHECK(y.values == path.y);
    CHECK(y.dates.front() == Period{1990, 3});
    csv.clear();
    csv.seekg(0);
    const auto c = read_dataset(csv, std::string("c"), {}, "sim");
    CHECK(c.values == path.c);
}
