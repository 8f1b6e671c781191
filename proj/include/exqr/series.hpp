#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exqr {

using Date = std::chrono::year_month_day;

/// Strict ISO-8601 calendar day, YYYY-MM-DD.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);

struct SeriesRow {
    Date date;
    double obs = 0.0;  // observed streamflow, mm/day
    double sim = 0.0;  // simulated streamflow, mm/day
};

/// Observed/simulated pair for one basin with strictly increasing dates.
struct SeriesPair {
    std::string basin_id;
    std::vector<SeriesRow> rows;
    // Rows removed because obs or sim was missing or not finite.
    std::size_t dropped_rows = 0;
};

/// Parses the `date,obs,sim` CSV format. Empty or non-finite cells drop the
/// row. Malformed headers, dates and numbers, negative observations, and
/// duplicate or decreasing dates raise ParseError with the line number.
/// Throws EmptySeriesError when no row survives.
SeriesPair parse_series(std::string_view text, const std::string& basin_id);
SeriesPair load_series(const std::filesystem::path& path, const std::string& basin_id);

std::string series_csv(const SeriesPair& series);

/// Whole file as a string; InvalidInputError if it cannot be read.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal text that reads back as the same double.
std::string format_real(double v);

}  // namespace exqr
