#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exqr/prediction_table.hpp"
#include "exqr/quantile_regression.hpp"
#include "exqr/series.hpp"

namespace exqr {

/// Inclusive calendar interval.
struct DateRange {
    Date start;
    Date end;

    bool contains(Date d) const { return start <= d && d <= end; }
    friend bool operator==(const DateRange&, const DateRange&) = default;
};

/// "YYYY-MM-DD:YYYY-MM-DD"; throws InvalidConfigError.
DateRange parse_date_range(std::string_view text);
std::string format_date_range(const DateRange& r);

struct RunConfig {
    // Both empty: first half of the rows trains, second half tests.
    std::optional<DateRange> train;
    std::optional<DateRange> test;
    std::vector<QuantileLevel> levels{QuantileLevel(0.97), QuantileLevel(0.999), QuantileLevel(0.9999)};
    double nu = 0.1;
    std::optional<std::size_t> k;  // empty means automatic selection
    std::uint64_t seed = 1;
    std::vector<Method> methods{Method::conventional, Method::extremal};

    /// Ranges disjoint with train first, both or neither given, non-empty
    /// levels and methods, nu in (0, 1). Throws InvalidConfigError.
    void validate() const;
};

/// Reads a JSON object with any of the keys train, test, levels, nu, k
/// ("auto" or an integer), seed and methods. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& doc, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

/// Comma-separated lists as accepted on the command line.
std::vector<QuantileLevel> parse_level_list(std::string_view text);
std::vector<Method> parse_method_list(std::string_view text);
std::optional<std::size_t> parse_k(std::string_view text);

}  // namespace exqr
