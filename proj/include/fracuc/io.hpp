#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracuc/arma_map.hpp"
#include "fracuc/inference.hpp"
#include "fracuc/reduced.hpp"
#include "fracuc/simulate.hpp"
#include "fracuc/ssmodel.hpp"

namespace fracuc {

enum class Frequency { Monthly, Quarterly };

/// A calendar month or quarter; `sub` is 1..12 or 1..4.
struct Period {
    int year = 0;
    int sub = 1;
    auto operator<=>(const Period&) const = default;
};

[[nodiscard]] Period next_period(Period p, Frequency f) noexcept;
/// Periods from a to b; zero when equal, negative when b precedes a.
[[nodiscard]] long periods_between(Period a, Period b, Frequency f) noexcept;
/// "1973Q1" or "1973-01".
[[nodiscard]] std::string period_label(Period p, Frequency f);
/// First day of the period as YYYY-MM-DD.
[[nodiscard]] std::string period_iso(Period p, Frequency f);
/// Accepts YYYYQn, YYYY:n and YYYY-Qn for quarters, YYYY-MM and YYYY-MM-DD for either.
[[nodiscard]] Period parse_period(const std::string& text, Frequency f);
[[nodiscard]] const char* frequency_name(Frequency f) noexcept;
[[nodiscard]] Frequency parse_frequency(const std::string& s);

struct Transform {
    bool log = false;
    double scale = 1.0;
};

/// A validated univariate series with its calendar and the transform applied to it.
struct Dataset {
    std::vector<Period> dates;
    std::vector<double> values;
    Frequency frequency = Frequency::Quarterly;
    std::string column;
    std::string source;
    Transform transform;
};

/**
 * @brief Reads a CSV with a header row, a date column and numeric columns.
 *
 * The date column is the one named date, DATE or observation_date, else the first.
 * Without `column` the file must have exactly one other column. Lines starting with
 * '#' are skipped. Dates are YYYY-MM-DD, YYYY-MM or YYYYQn; the frequency follows
 * from the first two rows. Errors name the file line.
 */
[[nodiscard]] Dataset read_dataset(std::istream& in, const std::optional<std::string>& column,
                                   const Transform& transform, const std::string& source = "<stream>");
[[nodiscard]] Dataset ingest(const std::string& path, const std::optional<std::string>& column,
                             const Transform& transform);

/// Dates from `start` to `end`, both inclusive, must be in the data.
[[nodiscard]] Dataset slice(const Dataset& data, const std::optional<std::string>& start,
                            const std::optional<std::string>& end);

/// 1-based observation index of a break label such as "1973Q1".
[[nodiscard]] std::size_t break_index(const Dataset& data, const std::string& label);

nlohmann::json to_json(const Params& theta);
nlohmann::json to_json(const ModelSpec& spec);
nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const MonteCarloResult& mc);
nlohmann::json to_json(const GphResult& g);
nlohmann::json to_json(const EstimateOptions& opts);
[[nodiscard]] Params params_from_json(const nlohmann::json& j);
[[nodiscard]] ModelSpec spec_from_json(const nlohmann::json& j);

/// Versioned document with the grid, v, w, n and every knot.
nlohmann::json coeff_map_to_json(const CoeffMap& map);
[[nodiscard]] CoeffMap coeff_map_from_json(const nlohmann::json& j);

/// date,y,x,c,eta,eps,deterministic with consecutive periods from `start`.
void write_sim_csv(std::ostream& out, const SimPath& path, Period start, Frequency f);

}  // namespace fracuc
