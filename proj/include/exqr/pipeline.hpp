#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "exqr/evaluation.hpp"
#include "exqr/extremal_model.hpp"
#include "exqr/prediction_table.hpp"
#include "exqr/run_config.hpp"
#include "exqr/series.hpp"
#include "exqr/synth.hpp"

namespace exqr {

/// Synthetic basin: obs = y and sim = x of the synthetic law, one row per
/// consecutive day from `start`.
SeriesPair synth_series(const synth::SynthSpec& spec, Date start, const std::string& basin_id);
nlohmann::ordered_json synth_spec_json(const synth::SynthSpec& spec);

/// Train and test slices of a series under a run configuration. Rows outside
/// both ranges are ignored.
struct SeriesSplit {
    std::vector<SeriesRow> train;
    std::vector<SeriesRow> test;
};

SeriesSplit split_series(const SeriesPair& series, const RunConfig& cfg);

/// obs as response, sim as the single covariate.
Dataset training_dataset(std::span<const SeriesRow> rows);
Eigen::MatrixXd covariate_design(std::span<const SeriesRow> rows);

ExtremalOptions extremal_options(const RunConfig& cfg);

struct RunResult {
    std::string basin_id;
    std::size_t train_rows = 0;
    std::vector<Date> test_dates;
    std::vector<double> test_obs;
    PredictionTable table;
    EvaluationReport report;
    ExtremalQRModel model;
};

/// Fits on the train slice, predicts every configured method and level over
/// the test slice and evaluates. Failures are rethrown as BasinError.
RunResult run_postprocess(const SeriesPair& series, const RunConfig& cfg);

/// Predictions CSV, `date,method,level,value`, ordered by method, level, date.
std::string predictions_csv(std::span<const Date> dates, const PredictionTable& table);

struct PredictionFile {
    std::vector<Date> dates;
    PredictionTable table;
};

/// Inverse of predictions_csv. Every (method, level) must cover the same
/// dates. Throws ParseError with the line number.
PredictionFile parse_predictions(std::string_view text);

/// Report JSON for one basin: run metadata plus the evaluation report.
nlohmann::ordered_json run_report_json(const RunResult& result, const RunConfig& cfg);

/// Writes predictions.csv, report.json, exceedance.csv, log_ratio.csv,
/// evi_histogram.csv and model.json into `dir`, plus SVG plots when asked.
void write_run_outputs(const RunResult& result, const RunConfig& cfg, const std::filesystem::path& dir,
                       bool plots);

struct ManifestEntry {
    std::filesystem::path path;
    std::string basin_id;
};

/// CSV with header `basin_id,path`; relative paths resolve against the
/// manifest's directory. Basin ids must be unique.
std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

struct BasinOutcome {
    std::string basin_id;
    std::optional<RunResult> result;
    std::string error;  // set when result is empty
};

struct LevelAggregate {
    QuantileLevel level{0.5};
    std::size_t basins = 0;
    double mean_of_means = 0.0;
    double median_of_means = 0.0;
};

struct BatchSummary {
    std::size_t basins_total = 0;
    std::size_t basins_failed = 0;
    // Across basins, of each basin's time-averaged log ratio.
    std::vector<LevelAggregate> log_ratio;
    // Of the per-basin pooled indices.
    std::optional<EviSummary> evi;
};

struct BatchResult {
    std::vector<BasinOutcome> outcomes;  // sorted by basin_id
    BatchSummary summary;
};

/// Runs every basin, up to `threads` at a time (0 picks the hardware
/// concurrency). Results do not depend on manifest order or thread count.
/// Throws BatchError when every basin fails.
BatchResult run_batch(std::span<const ManifestEntry> manifest, const RunConfig& cfg, unsigned threads = 0);

nlohmann::ordered_json batch_summary_json(const BatchResult& batch, const RunConfig& cfg);

/// summary.json plus one subdirectory of run outputs per successful basin.
void write_batch_outputs(const BatchResult& batch, const RunConfig& cfg, const std::filesystem::path& dir,
                         bool plots);

}  // namespace exqr
