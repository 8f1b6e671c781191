#include "exqr/series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "exqr/errors.hpp"

namespace exqr {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

bool all_digits(std::string_view s) {
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return !s.empty();
}

int to_int(std::string_view s) {
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

// Empty optional for an empty cell; NaN for non-finite input.
std::optional<double> parse_cell(std::string_view cell, const char* column, std::size_t line) {
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = cell.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
    if (ec == std::errc::result_out_of_range) return std::numeric_limits<double>::quiet_NaN();
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("line " + std::to_string(line) + ": " + column + " value \"" + std::string(cell) +
                             "\" is not a number",
                         column, line);
    }
    return v;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    const auto y = text.substr(0, 4), m = text.substr(5, 2), d = text.substr(8, 2);
    if (!all_digits(y) || !all_digits(m) || !all_digits(d)) return std::nullopt;
    const Date date{std::chrono::year(to_int(y)), std::chrono::month(static_cast<unsigned>(to_int(m))),
                    std::chrono::day(static_cast<unsigned>(to_int(d)))};
    if (!date.ok()) return std::nullopt;
    return date;
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

SeriesPair parse_series(std::string_view text, const std::string& basin_id) {
    SeriesPair out;
    out.basin_id = basin_id;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::size_t line_no = 0;
    bool header_seen = false;
    std::optional<Date> previous;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const std::string_view raw = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        const auto line = trim(raw);
        if (line.empty()) continue;

        const auto cells = split(line, ',');
        if (!header_seen) {
            if (cells.size() != 3 || cells[0] != "date" || cells[1] != "obs" || cells[2] != "sim") {
                throw ParseError("line " + std::to_string(line_no) + ": expected header \"date,obs,sim\", got \"" +
                                     std::string(line) + "\"",
                                 "header", line_no);
            }
            header_seen = true;
            continue;
        }
        if (cells.size() != 3) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                 std::to_string(cells.size()),
                             "", line_no);
        }
        const auto date = parse_date(cells[0]);
        if (!date) {
            throw ParseError("line " + std::to_string(line_no) + ": malformed date \"" + std::string(cells[0]) + "\"",
                             "date", line_no);
        }
        if (previous && *date == *previous) {
            throw ParseError("line " + std::to_string(line_no) + ": duplicate date " + format_date(*date), "date",
                             line_no);
        }
        if (previous && *date < *previous) {
            throw ParseError("line " + std::to_string(line_no) + ": date " + format_date(*date) + " is earlier than " +
                                 format_date(*previous),
                             "date", line_no);
        }
        previous = date;

        const auto obs = parse_cell(cells[1], "obs", line_no);
        const auto sim = parse_cell(cells[2], "sim", line_no);
        if (!obs || !sim || !std::isfinite(*obs) || !std::isfinite(*sim)) {
            ++out.dropped_rows;
            continue;
        }
        if (*obs < 0.0) {
            throw ParseError("line " + std::to_string(line_no) + ": negative observed streamflow", "obs", line_no);
        }
        out.rows.push_back(SeriesRow{*date, *obs, *sim});
    }
    if (!header_seen) throw ParseError("series file has no header", "header", 1);
    if (out.rows.empty()) {
        throw EmptySeriesError("series " + basin_id + " has no complete rows (" + std::to_string(out.dropped_rows) +
                               " dropped)");
    }
    return out;
}

SeriesPair load_series(const std::filesystem::path& path, const std::string& basin_id) {
    return parse_series(read_text_file(path), basin_id);
}

std::string series_csv(const SeriesPair& series) {
    std::string out = "date,obs,sim\n";
    for (const auto& r : series.rows) {
        out += format_date(r.date);
        out += ',';
        out += format_real(r.obs);
        out += ',';
        out += format_real(r.sim);
        out += '\n';
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw InvalidInputError("failed writing " + path.string());
}

}  // namespace exqr
