#include "exqr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <thread>

#include "exqr/errors.hpp"
#include "exqr/plots.hpp"

namespace exqr {

namespace {

using ojson = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

// Calls f(line_number, line) for every non-blank line.
template <class F>
void for_each_line(std::string_view text, F&& f) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const auto line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (!line.empty()) f(line_no, line);
    }
}

bool valid_basin_id(std::string_view id) {
    if (id.empty() || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

double mean_of(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return sorted_quantile(v, 0.5);
}

}  // namespace

SeriesPair synth_series(const synth::SynthSpec& spec, Date start, const std::string& basin_id) {
    const auto sample = synth::generate(spec);
    SeriesPair out;
    out.basin_id = basin_id;
    std::chrono::sys_days day{start};
    for (std::size_t i = 0; i < sample.x.size(); ++i, day += std::chrono::days{1}) {
        out.rows.push_back(SeriesRow{Date{day}, sample.data.response()(static_cast<Eigen::Index>(i)), sample.x[i]});
    }
    return out;
}

ojson synth_spec_json(const synth::SynthSpec& spec) {
    return ojson{{"law", "y = (a0 + a1 x) (1 - U)^(-gamma), x ~ U[0,1], U ~ U[0,1)"},
                 {"n", spec.n},
                 {"gamma", spec.gamma},
                 {"a0", spec.scale_intercept},
                 {"a1", spec.scale_slope},
                 {"seed", spec.seed}};
}

SeriesSplit split_series(const SeriesPair& series, const RunConfig& cfg) {
    SeriesSplit out;
    if (!cfg.train) {
        const std::size_t half = series.rows.size() / 2;
        out.train.assign(series.rows.begin(), series.rows.begin() + static_cast<std::ptrdiff_t>(half));
        out.test.assign(series.rows.begin() + static_cast<std::ptrdiff_t>(half), series.rows.end());
        return out;
    }
    for (const auto& row : series.rows) {
        if (cfg.train->contains(row.date)) {
            out.train.push_back(row);
        } else if (cfg.test->contains(row.date)) {
            out.test.push_back(row);
        }
    }
    return out;
}

Dataset training_dataset(std::span<const SeriesRow> rows) {
    std::vector<double> sim, obs;
    sim.reserve(rows.size());
    obs.reserve(rows.size());
    for (const auto& r : rows) {
        sim.push_back(r.sim);
        obs.push_back(r.obs);
    }
    return Dataset::from_columns(sim, obs);
}

Eigen::MatrixXd covariate_design(std::span<const SeriesRow> rows) {
    Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) design(static_cast<Eigen::Index>(i), 0) = rows[i].sim;
    return design;
}

ExtremalOptions extremal_options(const RunConfig& cfg) {
    ExtremalOptions opt;
    opt.k = cfg.k;
    opt.nu = cfg.nu;
    opt.target_levels = cfg.levels;
    return opt;
}

RunResult run_postprocess(const SeriesPair& series, const RunConfig& cfg) {
    try {
        cfg.validate();
        const auto split = split_series(series, cfg);
        if (split.train.empty()) throw EmptySeriesError("train slice is empty");
        if (split.test.empty()) throw EmptySeriesError("test slice is empty");

        const Dataset train = training_dataset(split.train);
        ExtremalQRModel model = fit_extremal(train, extremal_options(cfg));
        PredictionTable table = predict_table(model, covariate_design(split.test), cfg.methods);

        std::vector<double> gammas;
        for (const auto& e : point_evi_estimates(model, train.design())) {
            if (e.gamma) gammas.push_back(*e.gamma);
        }
        std::vector<Date> dates;
        std::vector<double> obs;
        for (const auto& r : split.test) {
            dates.push_back(r.date);
            obs.push_back(r.obs);
        }
        EvaluationReport report = evaluate(obs, table, gammas);
        return RunResult{series.basin_id, split.train.size(), std::move(dates), std::move(obs),
                         std::move(table),  std::move(report),    std::move(model)};
    } catch (const BasinError&) {
        throw;
    } catch (const Error& e) {
        throw BasinError(series.basin_id, e.what(), std::current_exception());
    }
}

std::string predictions_csv(std::span<const Date> dates, const PredictionTable& table) {
    if (dates.size() != table.points) throw InvalidInputError("predictions_csv: one date per point is required");
    std::vector<std::string> date_text;
    date_text.reserve(dates.size());
    for (const auto& d : dates) date_text.push_back(format_date(d));
    std::string out = "date,method,level,value\n";
    for (const auto& s : table.series) {
        const std::string prefix = std::string(method_name(s.method)) + "," + format_real(s.level.value()) + ",";
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            out += date_text[i];
            out += ',';
            out += prefix;
            out += format_real(s.values[i]);
            out += '\n';
        }
    }
    return out;
}

PredictionFile parse_predictions(std::string_view text) {
    struct Group {
        Method method;
        QuantileLevel level;
        std::vector<Date> dates;
        std::vector<double> values;
        std::size_t first_line;
    };
    std::vector<Group> groups;
    bool header = false;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto f = split_fields(line);
        if (!header) {
            if (f.size() != 4 || f[0] != "date" || f[1] != "method" || f[2] != "level" || f[3] != "value") {
                throw ParseError("line " + std::to_string(line_no) + ": expected header \"date,method,level,value\"",
                                 "header", line_no);
            }
            header = true;
            return;
        }
        auto fail = [&](const std::string& field, const std::string& msg) {
            throw ParseError("line " + std::to_string(line_no) + ": " + msg, field, line_no);
        };
        if (f.size() != 4) fail("", "expected 4 fields");
        const auto date = parse_date(f[0]);
        if (!date) fail("date", "malformed date \"" + std::string(f[0]) + "\"");
        const auto method = parse_method(f[1]);
        if (!method) fail("method", "unknown method \"" + std::string(f[1]) + "\"");
        double level = 0.0, value = 0.0;
        auto number = [](std::string_view s, double& v) {
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
        };
        if (!number(f[2], level) || !(level > 0.0 && level < 1.0)) fail("level", "level must be a number in (0, 1)");
        if (!number(f[3], value)) fail("value", "value \"" + std::string(f[3]) + "\" is not a number");
        const QuantileLevel tau(level);
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const Group& g) { return g.method == *method && g.level == tau; });
        if (it == groups.end()) {
            groups.push_back(Group{*method, tau, {}, {}, line_no});
            it = groups.end() - 1;
        }
        if (!it->dates.empty() && !(it->dates.back() < *date)) {
            fail("date", "dates of " + std::string(f[1]) + " at level " + std::string(f[2]) +
                             " must be strictly increasing (" + format_date(*date) + ")");
        }
        it->dates.push_back(*date);
        it->values.push_back(value);
    });
    if (!header) throw ParseError("predictions file has no header", "header", 1);
    if (groups.empty()) throw EmptySeriesError("predictions file has no rows");

    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        return a.method != b.method ? a.method < b.method : a.level < b.level;
    });
    PredictionFile out;
    out.dates = groups.front().dates;
    out.table.points = out.dates.size();
    for (auto& g : groups) {
        if (g.dates != out.dates) {
            throw ParseError("series starting at line " + std::to_string(g.first_line) +
                                 " does not cover the same dates as the others",
                             "date", g.first_line);
        }
        PredictionSeries s;
        s.method = g.method;
        s.level = g.level;
        s.values = std::move(g.values);
        s.fallback.assign(s.values.size(), 0);
        out.table.series.push_back(std::move(s));
    }
    return out;
}

ojson run_report_json(const RunResult& result, const RunConfig& cfg) {
    const auto& model = result.model;
    ojson doc;
    doc["basin_id"] = result.basin_id;
    doc["train_rows"] = result.train_rows;
    doc["test_rows"] = result.test_dates.size();
    if (!result.test_dates.empty()) {
        doc["test_start"] = format_date(result.test_dates.front());
        doc["test_end"] = format_date(result.test_dates.back());
    }
    doc["config"] = run_config_to_json(cfg);
    doc["model"] = ojson{{"k", model.config().k},
                         {"nu", model.config().nu},
                         {"tau_base", model.tau_base().value()},
                         {"gamma_pool", model.gamma_pool()},
                         {"excluded_count", model.excluded_count()}};
    doc["series_count"] = result.table.series.size();
    doc["evaluation"] = report_to_json(result.report);
    return doc;
}

void write_run_outputs(const RunResult& result, const RunConfig& cfg, const std::filesystem::path& dir, bool plots) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "predictions.csv", predictions_csv(result.test_dates, result.table));
    write_text_file(dir / "report.json", run_report_json(result, cfg).dump(2) + "\n");
    write_text_file(dir / "exceedance.csv", exceedance_csv(result.report));
    write_text_file(dir / "log_ratio.csv", log_ratio_csv(result.report));
    if (result.report.evi) write_text_file(dir / "evi_histogram.csv", evi_histogram_csv(*result.report.evi));
    write_text_file(dir / "model.json", serialize_model(result.model));
    if (!plots) return;
    if (result.report.evi) {
        write_text_file(dir / "evi_histogram.svg",
                        svg_evi_histogram(*result.report.evi, "Point EVI estimates, basin " + result.basin_id));
    }
    write_text_file(dir / "predictions.svg",
                    svg_prediction_series(result.test_obs, result.table, "Test period, basin " + result.basin_id));
}

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    std::vector<ManifestEntry> out;
    bool header = false;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        const auto f = split_fields(line);
        if (!header) {
            if (f.size() != 2 || f[0] != "basin_id" || f[1] != "path") {
                throw ParseError("line " + std::to_string(line_no) + ": expected header \"basin_id,path\"", "header",
                                 line_no);
            }
            header = true;
            return;
        }
        if (f.size() != 2 || f[1].empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected basin_id,path", "", line_no);
        }
        if (!valid_basin_id(f[0])) {
            throw ParseError("line " + std::to_string(line_no) + ": invalid basin_id \"" + std::string(f[0]) + "\"",
                             "basin_id", line_no);
        }
        std::filesystem::path p{std::string(f[1])};
        if (p.is_relative()) p = base_dir / p;
        out.push_back(ManifestEntry{p, std::string(f[0])});
    });
    if (!header) throw ParseError("manifest has no header", "header", 1);
    return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_text_file(path), path.parent_path());
}

BatchResult run_batch(std::span<const ManifestEntry> manifest, const RunConfig& cfg, unsigned threads) {
    if (manifest.empty()) throw InvalidInputError("batch manifest is empty");
    cfg.validate();
    std::vector<ManifestEntry> entries(manifest.begin(), manifest.end());
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.basin_id < b.basin_id; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].basin_id == entries[i - 1].basin_id) {
            throw InvalidInputError("duplicate basin_id \"" + entries[i].basin_id + "\" in manifest");
        }
    }

    BatchResult batch;
    batch.outcomes.resize(entries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < entries.size(); i = next++) {
            auto& out = batch.outcomes[i];
            out.basin_id = entries[i].basin_id;
            try {
                out.result = run_postprocess(load_series(entries[i].path, entries[i].basin_id), cfg);
            } catch (const BasinError& e) {
                out.error = e.what();
            } catch (const std::exception& e) {
                out.error = "basin " + entries[i].basin_id + ": " + e.what();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, entries.size()));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }

    auto& summary = batch.summary;
    summary.basins_total = entries.size();
    std::vector<double> gammas;
    std::string causes;
    for (const auto& o : batch.outcomes) {
        if (o.result) {
            gammas.push_back(o.result->model.gamma_pool());
        } else {
            ++summary.basins_failed;
            causes += "\n  " + o.error;
        }
    }
    if (summary.basins_failed == entries.size()) throw BatchError("every basin failed:" + causes);

    for (const auto& level : cfg.levels) {
        std::vector<double> means;
        for (const auto& o : batch.outcomes) {
            if (!o.result) continue;
            for (const auto& c : o.result->report.comparisons) {
                if (c.level == level && c.log_ratio) means.push_back(c.log_ratio->mean);
            }
        }
        if (means.empty()) continue;
        summary.log_ratio.push_back(LevelAggregate{level, means.size(), mean_of(means), median_of(means)});
    }
    summary.evi = evi_summary(gammas);
    return batch;
}

ojson batch_summary_json(const BatchResult& batch, const RunConfig& cfg) {
    const auto& s = batch.summary;
    ojson doc;
    doc["basins_total"] = s.basins_total;
    doc["basins_succeeded"] = s.basins_total - s.basins_failed;
    doc["basins_failed"] = s.basins_failed;
    doc["config"] = run_config_to_json(cfg);
    auto levels = ojson::array();
    for (const auto& a : s.log_ratio) {
        levels.push_back(ojson{{"level", a.level.value()},
                               {"basins", a.basins},
                               {"mean_of_basin_means", a.mean_of_means},
                               {"median_of_basin_means", a.median_of_means}});
    }
    doc["log_ratio"] = levels;
    doc["evi_across_basins"] = s.evi ? evi_summary_to_json(*s.evi) : ojson(nullptr);
    auto basins = ojson::array();
    for (const auto& o : batch.outcomes) {
        ojson b{{"basin_id", o.basin_id}};
        if (o.result) {
            b["status"] = "ok";
            b["k"] = o.result->model.config().k;
            b["gamma_pool"] = o.result->model.gamma_pool();
            auto means = ojson::array();
            for (const auto& c : o.result->report.comparisons) {
                means.push_back(ojson{{"level", c.level.value()},
                                      {"log_ratio_mean", c.log_ratio ? ojson(c.log_ratio->mean) : ojson(nullptr)}});
            }
            b["log_ratio_means"] = means;
        } else {
            b["status"] = "failed";
            b["error"] = o.error;
        }
        basins.push_back(std::move(b));
    }
    doc["basins"] = basins;
    return doc;
}

void write_batch_outputs(const BatchResult& batch, const RunConfig& cfg, const std::filesystem::path& dir,
                         bool plots) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "summary.json", batch_summary_json(batch, cfg).dump(2) + "\n");
    for (const auto& o : batch.outcomes) {
        if (o.result) write_run_outputs(*o.result, cfg, dir / o.basin_id, plots);
    }
    if (plots && batch.summary.evi) {
        write_text_file(dir / "evi_across_basins.svg",
                        svg_evi_histogram(*batch.summary.evi, "Pooled EVI across basins"));
    }
}

}  // namespace exqr
