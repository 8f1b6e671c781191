// exqr: extremal quantile post-processing of simulated streamflow.
//
// Exit codes: 0 success, 1 fatal error, 2 usage error, 3 batch finished with
// at least one failed basin.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "exqr/errors.hpp"
#include "exqr/pipeline.hpp"

namespace fs = std::filesystem;
using namespace exqr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;

struct ConfigFlags {
    std::string config;
    std::string train;
    std::string test;
    std::string levels;
    std::optional<double> nu;
    std::string k;
    std::optional<std::uint64_t> seed;
    std::string methods;

    void attach(CLI::App* app, bool ranges = true) {
        app->add_option("--config", config, "JSON run configuration; flags override its values");
        if (ranges) {
            app->add_option("--train", train, "training period YYYY-MM-DD:YYYY-MM-DD");
            app->add_option("--test", test, "test period YYYY-MM-DD:YYYY-MM-DD");
        }
        app->add_option("--levels", levels, "comma-separated quantile levels (default 0.97,0.999,0.9999)");
        app->add_option("--nu", nu, "exponent of the trimmed top levels (default 0.1)");
        app->add_option("--k", k, "intermediate tail size, or \"auto\" (default auto)");
        app->add_option("--seed", seed, "seed recorded with the run");
        app->add_option("--methods", methods, "comma-separated subset of conventional,extremal");
    }

    RunConfig resolve(bool check = true) const {
        RunConfig cfg;
        if (!config.empty()) cfg = load_run_config(config);
        if (!train.empty()) cfg.train = parse_date_range(train);
        if (!test.empty()) cfg.test = parse_date_range(test);
        if (!levels.empty()) cfg.levels = parse_level_list(levels);
        if (nu) cfg.nu = *nu;
        if (!k.empty()) cfg.k = parse_k(k);
        if (seed) cfg.seed = *seed;
        if (!methods.empty()) cfg.methods = parse_method_list(methods);
        if (check) cfg.validate();
        return cfg;
    }
};

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
    }
}

std::string basin_or_stem(const std::string& basin, const std::string& input) {
    return basin.empty() ? fs::path(input).stem().string() : basin;
}

// Rows of `series` on the prediction dates, in order.
std::vector<double> observed_on(const SeriesPair& series, std::span<const Date> dates) {
    std::vector<double> out;
    std::size_t j = 0;
    for (const auto& d : dates) {
        while (j < series.rows.size() && series.rows[j].date < d) ++j;
        if (j == series.rows.size() || series.rows[j].date != d) {
            throw InvalidInputError("no observation on predicted date " + format_date(d));
        }
        out.push_back(series.rows[j].obs);
    }
    return out;
}

int cmd_synth(std::size_t n, double gamma, double a0, double a1, std::uint64_t seed, const std::string& start,
              const std::string& output, std::size_t basins, const std::string& output_dir) {
    synth::SynthSpec spec;
    spec.n = n;
    spec.gamma = gamma;
    spec.scale_intercept = a0;
    spec.scale_slope = a1;
    spec.seed = seed;
    spec.validate();
    const auto first = parse_date(start);
    if (!first) throw InvalidConfigError("--start must be YYYY-MM-DD");

    if (basins == 0) {
        if (output.empty()) throw InvalidConfigError("synth needs --output (or --basins with --output-dir)");
        write_text_file(output, series_csv(synth_series(spec, *first, "synth")));
        fs::path sidecar(output);
        sidecar.replace_extension(".spec.json");
        write_text_file(sidecar, synth_spec_json(spec).dump(2) + "\n");
        return kExitOk;
    }
    if (output_dir.empty()) throw InvalidConfigError("synth --basins needs --output-dir");
    std::string manifest = "basin_id,path\n";
    for (std::size_t b = 0; b < basins; ++b) {
        char id[32];
        std::snprintf(id, sizeof id, "basin%04zu", b + 1);
        synth::SynthSpec basin_spec = spec;
        basin_spec.seed = synth::derive_seed(seed, b);
        const fs::path file = fs::path(output_dir) / (std::string(id) + ".csv");
        write_text_file(file, series_csv(synth_series(basin_spec, *first, id)));
        write_text_file(fs::path(output_dir) / (std::string(id) + ".spec.json"),
                        synth_spec_json(basin_spec).dump(2) + "\n");
        manifest += std::string(id) + "," + id + ".csv\n";
    }
    write_text_file(fs::path(output_dir) / "manifest.csv", manifest);
    return kExitOk;
}

int cmd_fit(const ConfigFlags& flags, const std::string& input, const std::string& model_path) {
    const auto cfg = flags.resolve();
    const auto series = load_series(input, fs::path(input).stem().string());
    const auto split = split_series(series, cfg);
    if (split.train.empty()) throw EmptySeriesError("train slice is empty");
    const auto model = fit_extremal(training_dataset(split.train), extremal_options(cfg));
    emit(model_path, serialize_model(model));
    std::cerr << "fitted on " << split.train.size() << " rows: k = " << model.config().k
              << ", tau_base = " << model.tau_base().value() << ", gamma_pool = " << model.gamma_pool() << "\n";
    return kExitOk;
}

int cmd_predict(const ConfigFlags& flags, const std::string& input, const std::string& model_path,
                const std::string& output) {
    // Only the test period matters here.
    const RunConfig cfg = flags.resolve(false);
    RunConfig without_ranges = cfg;
    without_ranges.train.reset();
    without_ranges.test.reset();
    without_ranges.validate();
    const auto model = deserialize_model(read_text_file(model_path));
    const auto series = load_series(input, fs::path(input).stem().string());
    std::vector<SeriesRow> rows;
    for (const auto& r : series.rows) {
        if (!cfg.test || cfg.test->contains(r.date)) rows.push_back(r);
    }
    if (rows.empty()) throw EmptySeriesError("no rows to predict");
    const auto table = predict_table(model, covariate_design(rows), cfg.methods);
    std::vector<Date> dates;
    for (const auto& r : rows) dates.push_back(r.date);
    emit(output, predictions_csv(dates, table));
    return kExitOk;
}

int cmd_evaluate(const std::string& input, const std::string& predictions, const std::string& model_path,
                 const std::string& output_dir) {
    const auto series = load_series(input, fs::path(input).stem().string());
    const auto file = parse_predictions(read_text_file(predictions));
    const auto obs = observed_on(series, file.dates);
    std::vector<double> gammas;
    if (!model_path.empty()) {
        const auto model = deserialize_model(read_text_file(model_path));
        std::vector<SeriesRow> rows;
        for (const auto& r : series.rows) rows.push_back(r);
        for (const auto& e : point_evi_estimates(model, covariate_design(rows))) {
            if (e.gamma) gammas.push_back(*e.gamma);
        }
    }
    const auto report = evaluate(obs, file.table, gammas);
    const std::string json = report_to_json(report).dump(2) + "\n";
    if (output_dir.empty()) {
        std::cout << json;
        return kExitOk;
    }
    const fs::path dir(output_dir);
    write_text_file(dir / "report.json", json);
    write_text_file(dir / "exceedance.csv", exceedance_csv(report));
    write_text_file(dir / "log_ratio.csv", log_ratio_csv(report));
    if (report.evi) write_text_file(dir / "evi_histogram.csv", evi_histogram_csv(*report.evi));
    return kExitOk;
}

int cmd_run(const ConfigFlags& flags, const std::string& input, const std::string& basin, const std::string& output_dir,
            bool plots) {
    const auto cfg = flags.resolve();
    const auto series = load_series(input, basin_or_stem(basin, input));
    const auto result = run_postprocess(series, cfg);
    write_run_outputs(result, cfg, output_dir, plots);
    std::cerr << "basin " << result.basin_id << ": " << result.train_rows << " train rows, "
              << result.test_dates.size() << " test rows, " << result.table.series.size()
              << " prediction series, gamma_pool = " << result.model.gamma_pool() << "\n";
    return kExitOk;
}

int cmd_batch(const ConfigFlags& flags, const std::string& manifest, const std::string& output_dir, bool plots,
              unsigned threads) {
    const auto cfg = flags.resolve();
    const auto entries = load_manifest(manifest);
    const auto batch = run_batch(entries, cfg, threads);
    write_batch_outputs(batch, cfg, output_dir, plots);
    for (const auto& o : batch.outcomes) {
        if (!o.result) std::cerr << "failed: " << o.error << "\n";
    }
    std::cerr << (batch.summary.basins_total - batch.summary.basins_failed) << " of " << batch.summary.basins_total
              << " basins succeeded\n";
    return batch.summary.basins_failed > 0 ? kExitPartial : kExitOk;
}

int cmd_compare(const std::string& predictions, const std::string& against, const std::string& output) {
    using ojson = nlohmann::ordered_json;
    const auto a = parse_predictions(read_text_file(predictions));
    ojson rows = ojson::array();
    auto add = [&](const PredictionSeries& x, const PredictionSeries& y, const std::string& label) {
        ojson row{{"comparison", label}, {"level", x.level.value()}};
        try {
            const auto r = log_quantile_ratio(x.values, y.values);
            row["log_ratio_mean"] = r.mean;
            row["log_ratio_median"] = r.median;
            row["compared"] = r.series.size();
            row["dropped"] = r.dropped;
        } catch (const EmptyComparisonError&) {
            row["log_ratio_mean"] = nullptr;
            row["log_ratio_median"] = nullptr;
        }
        rows.push_back(std::move(row));
    };
    if (against.empty()) {
        for (const auto& s : a.table.series) {
            if (s.method != Method::extremal) continue;
            if (const auto* c = a.table.find(Method::conventional, s.level)) add(s, *c, "extremal/conventional");
        }
    } else {
        const auto b = parse_predictions(read_text_file(against));
        if (a.dates != b.dates) throw InvalidInputError("the two prediction files cover different dates");
        for (const auto& s : a.table.series) {
            if (const auto* t = b.table.find(s.method, s.level)) add(s, *t, std::string(method_name(s.method)));
        }
    }
    if (rows.empty()) throw EmptyComparisonError("no comparable series");
    emit(output, rows.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extremal quantile regression post-processing of simulated streamflow"};
    app.require_subcommand(1);
    int code = kExitOk;

    std::string input, model, output, output_dir, basin, predictions, against, manifest, start = "2000-01-01";
    bool plots = false;
    unsigned threads = 0;
    std::size_t n = 1462, basins = 0;
    double gamma = 0.25, a0 = 1.0, a1 = 1.0;
    std::uint64_t seed = 1;
    ConfigFlags flags;

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic date,obs,sim series and its spec sidecar");
    synth_cmd->add_option("--n", n, "rows per series")->capture_default_str();
    synth_cmd->add_option("--gamma", gamma, "extreme value index")->capture_default_str();
    synth_cmd->add_option("--a0", a0, "scale intercept")->capture_default_str();
    synth_cmd->add_option("--a1", a1, "scale slope")->capture_default_str();
    synth_cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    synth_cmd->add_option("--start", start, "first date")->capture_default_str();
    synth_cmd->add_option("--output", output, "series CSV path");
    synth_cmd->add_option("--basins", basins, "write this many basins plus manifest.csv into --output-dir");
    synth_cmd->add_option("--output-dir", output_dir, "directory for --basins");
    synth_cmd->callback([&] { code = cmd_synth(n, gamma, a0, a1, seed, start, output, basins, output_dir); });

    auto* fit_cmd = app.add_subcommand("fit", "fit a model on the training period");
    fit_cmd->add_option("--input", input, "series CSV")->required();
    fit_cmd->add_option("--model", model, "model JSON to write (default stdout)");
    flags.attach(fit_cmd);
    fit_cmd->callback([&] { code = cmd_fit(flags, input, model); });

    auto* predict_cmd = app.add_subcommand("predict", "predict quantiles with a fitted model");
    predict_cmd->add_option("--input", input, "series CSV")->required();
    predict_cmd->add_option("--model", model, "model JSON")->required();
    predict_cmd->add_option("--output", output, "predictions CSV (default stdout)");
    flags.attach(predict_cmd);
    predict_cmd->callback([&] { code = cmd_predict(flags, input, model, output); });

    auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a predictions CSV against observations");
    evaluate_cmd->add_option("--input", input, "series CSV with the observations")->required();
    evaluate_cmd->add_option("--predictions", predictions, "predictions CSV")->required();
    evaluate_cmd->add_option("--model", model, "model JSON, adds the EVI summary at the series' sim values");
    evaluate_cmd->add_option("--output-dir", output_dir, "write report files here (default JSON on stdout)");
    evaluate_cmd->callback([&] { code = cmd_evaluate(input, predictions, model, output_dir); });

    auto* run_cmd = app.add_subcommand("run", "fit, predict and evaluate one basin");
    run_cmd->add_option("--input", input, "series CSV")->required();
    run_cmd->add_option("--basin-id", basin, "basin id (default the file stem)");
    run_cmd->add_option("--output-dir", output_dir, "output directory")->required();
    run_cmd->add_flag("--plots", plots, "also write SVG plots");
    flags.attach(run_cmd);
    run_cmd->callback([&] { code = cmd_run(flags, input, basin, output_dir, plots); });

    auto* batch_cmd = app.add_subcommand("batch", "run every basin of a manifest");
    batch_cmd->add_option("--manifest", manifest, "CSV with header basin_id,path")->required();
    batch_cmd->add_option("--output-dir", output_dir, "output directory")->required();
    batch_cmd->add_option("--threads", threads, "worker threads (default all cores)");
    batch_cmd->add_flag("--plots", plots, "also write SVG plots");
    flags.attach(batch_cmd);
    batch_cmd->callback([&] { code = cmd_batch(flags, manifest, output_dir, plots, threads); });

    auto* compare_cmd = app.add_subcommand("compare", "log ratios between prediction series");
    compare_cmd->add_option("--predictions", predictions, "predictions CSV")->required();
    compare_cmd->add_option("--against", against,
                            "second predictions CSV; without it extremal is compared to conventional");
    compare_cmd->add_option("--output", output, "JSON output (default stdout)");
    compare_cmd->callback([&] { code = cmd_compare(predictions, against, output); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const InvalidConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return code;
}
