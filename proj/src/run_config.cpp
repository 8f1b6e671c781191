#include "exqr/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <string>

#include "exqr/errors.hpp"

namespace exqr {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
}

template <class F>
void for_each_item(std::string_view text, F&& f) {
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto pos = std::min(text.find(',', start), text.size());
        f(trim(text.substr(start, pos - start)));
        start = pos + 1;
    }
}

QuantileLevel level_from(double v) {
    try {
        return QuantileLevel(v);
    } catch (const InvalidInputError& e) {
        throw InvalidConfigError(std::string("levels: ") + e.what());
    }
}

}  // namespace

DateRange parse_date_range(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw InvalidConfigError("date range \"" + std::string(text) + "\" must look like YYYY-MM-DD:YYYY-MM-DD");
    }
    const auto start = parse_date(trim(text.substr(0, colon)));
    const auto end = parse_date(trim(text.substr(colon + 1)));
    if (!start || !end) throw InvalidConfigError("date range \"" + std::string(text) + "\" has a malformed date");
    if (*end < *start) throw InvalidConfigError("date range \"" + std::string(text) + "\" ends before it starts");
    return DateRange{*start, *end};
}

std::string format_date_range(const DateRange& r) { return format_date(r.start) + ":" + format_date(r.end); }

void RunConfig::validate() const {
    if (train.has_value() != test.has_value()) {
        throw InvalidConfigError("give both train and test ranges, or neither for a half/half split");
    }
    if (train && !(train->end < test->start)) {
        throw InvalidConfigError("train range " + format_date_range(*train) + " must end before test range " +
                                 format_date_range(*test) + " starts");
    }
    if (levels.empty()) throw InvalidConfigError("levels must not be empty");
    for (std::size_t j = 1; j < levels.size(); ++j) {
        if (!(levels[j - 1] < levels[j])) throw InvalidConfigError("levels must be strictly increasing");
    }
    if (methods.empty()) throw InvalidConfigError("methods must not be empty");
    if (!(nu > 0.0 && nu < 1.0)) throw InvalidConfigError("nu must lie in (0, 1)");
}

std::vector<QuantileLevel> parse_level_list(std::string_view text) {
    std::vector<QuantileLevel> out;
    for_each_item(text, [&](std::string_view item) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
            throw InvalidConfigError("levels: \"" + std::string(item) + "\" is not a number");
        }
        out.push_back(level_from(v));
    });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<Method> parse_method_list(std::string_view text) {
    std::vector<Method> out;
    for_each_item(text, [&](std::string_view item) {
        const auto m = parse_method(item);
        if (!m) throw InvalidConfigError("methods: unknown method \"" + std::string(item) + "\"");
        out.push_back(*m);
    });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::optional<std::size_t> parse_k(std::string_view text) {
    text = trim(text);
    if (text == "auto") return std::nullopt;
    std::size_t k = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw InvalidConfigError("k must be a positive integer or \"auto\", got \"" + std::string(text) + "\"");
    }
    return k;
}

RunConfig run_config_from_json(const nlohmann::json& doc, RunConfig cfg) {
    if (!doc.is_object()) throw InvalidConfigError("config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "train" || key == "test") {
            if (value.is_null()) {
                (key == "train" ? cfg.train : cfg.test).reset();
                continue;
            }
            if (!value.is_string()) throw InvalidConfigError(key + " must be a \"start:end\" string");
            (key == "train" ? cfg.train : cfg.test) = parse_date_range(value.get<std::string>());
        } else if (key == "levels") {
            if (!value.is_array()) throw InvalidConfigError("levels must be an array of numbers");
            cfg.levels.clear();
            for (const auto& v : value) {
                if (!v.is_number()) throw InvalidConfigError("levels must be an array of numbers");
                cfg.levels.push_back(level_from(v.get<double>()));
            }
            std::sort(cfg.levels.begin(), cfg.levels.end());
            cfg.levels.erase(std::unique(cfg.levels.begin(), cfg.levels.end()), cfg.levels.end());
        } else if (key == "nu") {
            if (!value.is_number()) throw InvalidConfigError("nu must be a number");
            cfg.nu = value.get<double>();
        } else if (key == "k") {
            if (value.is_string()) {
                cfg.k = parse_k(value.get<std::string>());
            } else if (value.is_number_unsigned()) {
                cfg.k = value.get<std::size_t>();
            } else {
                throw InvalidConfigError("k must be a positive integer or \"auto\"");
            }
        } else if (key == "seed") {
            if (!value.is_number_unsigned()) throw InvalidConfigError("seed must be a non-negative integer");
            cfg.seed = value.get<std::uint64_t>();
        } else if (key == "methods") {
            if (!value.is_array()) throw InvalidConfigError("methods must be an array of strings");
            std::string joined;
            for (const auto& v : value) {
                if (!v.is_string()) throw InvalidConfigError("methods must be an array of strings");
                if (!joined.empty()) joined += ',';
                joined += v.get<std::string>();
            }
            cfg.methods = parse_method_list(joined);
        } else {
            throw InvalidConfigError("unknown config key \"" + key + "\"");
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidConfigError(path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(doc, std::move(base));
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["train"] = cfg.train ? nlohmann::ordered_json(format_date_range(*cfg.train)) : nlohmann::ordered_json(nullptr);
    doc["test"] = cfg.test ? nlohmann::ordered_json(format_date_range(*cfg.test)) : nlohmann::ordered_json(nullptr);
    auto levels = nlohmann::ordered_json::array();
    for (const auto& l : cfg.levels) levels.push_back(l.value());
    doc["levels"] = levels;
    doc["nu"] = cfg.nu;
    doc["k"] = cfg.k ? nlohmann::ordered_json(*cfg.k) : nlohmann::ordered_json("auto");
    doc["seed"] = cfg.seed;
    auto methods = nlohmann::ordered_json::array();
    for (Method m : cfg.methods) methods.push_back(std::string(method_name(m)));
    doc["methods"] = methods;
    return doc;
}

}  // namespace exqr
