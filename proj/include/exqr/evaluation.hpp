#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "exqr/prediction_table.hpp"

namespace exqr {

struct Exceedance {
    std::size_t count = 0;
    double rate = 0.0;
    std::size_t n = 0;
};

/// Number and fraction of points with observed > predicted (strict).
Exceedance exceedance_rate(std::span<const double> observed, std::span<const double> predicted);

struct LogRatio {
    // ln(a / b) over the kept pairs, in input order.
    std::vector<double> series;
    double mean = 0.0;
    double median = 0.0;
    // Pairs where either side was non-positive.
    std::size_t dropped = 0;
};

/// Natural log of a / b elementwise. Pairs with a non-positive side are
/// dropped and counted; throws EmptyComparisonError if none remain.
LogRatio log_quantile_ratio(std::span<const double> a, std::span<const double> b);

struct EviSummary {
    static constexpr double kBinWidth = 0.05;
    static constexpr std::size_t kBins = 20;  // covering [0, 1]

    std::size_t count = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::vector<std::size_t> bins;
    std::size_t overflow = 0;  // values above 1
};

/// Median, quartiles (linear interpolation between order statistics) and a
/// fixed-width histogram of extreme value index estimates.
EviSummary evi_summary(std::span<const double> gammas);

/// Linear-interpolation sample quantile of already sorted data.
double sorted_quantile(std::span<const double> sorted, double prob);

/// Mean quantile scores are only meaningful at moderate levels; above this
/// they cannot rank extreme quantile predictors and are not reported.
inline constexpr double kMaxScoredLevel = 0.97;

struct MethodLevelEvaluation {
    Method method = Method::conventional;
    QuantileLevel level{0.5};
    Exceedance exceedance;
    std::size_t fallback_count = 0;
    bool below_tail = false;
    std::optional<double> mean_quantile_score;
};

struct LevelComparison {
    QuantileLevel level{0.5};
    // Extremal versus conventional; empty when no pair was comparable.
    std::optional<LogRatio> log_ratio;
};

struct EvaluationReport {
    std::size_t n_test = 0;
    std::vector<MethodLevelEvaluation> per_method_level;
    std::vector<LevelComparison> comparisons;
    std::optional<EviSummary> evi;
    std::size_t crossing_repairs = 0;
};

/// Exceedance for every series, extremal-versus-conventional log ratios at
/// every level both methods cover, and the EVI summary of `point_gammas`
/// (skipped when empty).
EvaluationReport evaluate(std::span<const double> observed, const PredictionTable& table,
                          std::span<const double> point_gammas);

nlohmann::ordered_json evi_summary_to_json(const EviSummary& summary);
nlohmann::ordered_json report_to_json(const EvaluationReport& report);

/// Flat tables: method,level,exceedance_count,exceedance_rate,n_test,...
std::string exceedance_csv(const EvaluationReport& report);
/// level,index,log_ratio
std::string log_ratio_csv(const EvaluationReport& report);
/// bin_lower,bin_upper,count (last row is the overflow bin)
std::string evi_histogram_csv(const EviSummary& summary);

}  // namespace exqr
