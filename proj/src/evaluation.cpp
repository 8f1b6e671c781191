#include "exqr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "exqr/errors.hpp"
#include "exqr/series.hpp"

namespace exqr {

namespace {

using json = nlohmann::ordered_json;

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw InvalidInputError(std::string(what) + ": series lengths differ (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
    }
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return sorted_quantile(values, 0.5);
}

}  // namespace

Exceedance exceedance_rate(std::span<const double> observed, std::span<const double> predicted) {
    require_same_length(observed.size(), predicted.size(), "exceedance_rate");
    if (observed.empty()) throw InvalidInputError("exceedance_rate: empty series");
    Exceedance e;
    e.n = observed.size();
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (observed[i] > predicted[i]) ++e.count;
    }
    e.rate = static_cast<double>(e.count) / static_cast<double>(e.n);
    return e;
}

LogRatio log_quantile_ratio(std::span<const double> a, std::span<const double> b) {
    require_same_length(a.size(), b.size(), "log_quantile_ratio");
    LogRatio r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] > 0.0) || !(b[i] > 0.0) || !std::isfinite(a[i]) || !std::isfinite(b[i])) {
            ++r.dropped;
            continue;
        }
        r.series.push_back(std::log(a[i] / b[i]));
    }
    if (r.series.empty()) {
        throw EmptyComparisonError("log_quantile_ratio: all " + std::to_string(a.size()) +
                                   " pairs have a non-positive quantile");
    }
    double sum = 0.0;
    for (double v : r.series) sum += v;
    r.mean = sum / static_cast<double>(r.series.size());
    r.median = median_of(r.series);
    return r;
}

double sorted_quantile(std::span<const double> sorted, double prob) {
    if (sorted.empty()) throw InvalidInputError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

EviSummary evi_summary(std::span<const double> gammas) {
    if (gammas.empty()) throw InvalidInputError("evi_summary: no estimates");
    std::vector<double> sorted(gammas.begin(), gammas.end());
    for (double g : sorted) {
        if (!std::isfinite(g) || g < 0.0) throw InvalidInputError("evi_summary: estimates must be finite and >= 0");
    }
    std::sort(sorted.begin(), sorted.end());

    EviSummary s;
    s.count = sorted.size();
    s.median = sorted_quantile(sorted, 0.5);
    s.q1 = sorted_quantile(sorted, 0.25);
    s.q3 = sorted_quantile(sorted, 0.75);
    s.bins.assign(EviSummary::kBins, 0);
    for (double g : sorted) {
        if (g > 1.0) {
            ++s.overflow;
            continue;
        }
        auto bin = static_cast<std::size_t>(std::floor(g * static_cast<double>(EviSummary::kBins)));
        s.bins[std::min(bin, EviSummary::kBins - 1)] += 1;
    }
    return s;
}

EvaluationReport evaluate(std::span<const double> observed, const PredictionTable& table,
                          std::span<const double> point_gammas) {
    require_same_length(observed.size(), table.points, "evaluate");
    EvaluationReport report;
    report.n_test = observed.size();
    report.crossing_repairs = table.crossing_repairs;

    for (const auto& s : table.series) {
        MethodLevelEvaluation e;
        e.method = s.method;
        e.level = s.level;
        e.exceedance = exceedance_rate(observed, s.values);
        e.fallback_count = s.fallback_count();
        e.below_tail = s.below_tail;
        if (s.level.value() <= kMaxScoredLevel) {
            double sum = 0.0;
            for (std::size_t i = 0; i < observed.size(); ++i) sum += pinball_loss(observed[i] - s.values[i], s.level);
            e.mean_quantile_score = sum / static_cast<double>(observed.size());
        }
        report.per_method_level.push_back(std::move(e));
    }

    for (const auto& s : table.series) {
        if (s.method != Method::extremal) continue;
        const PredictionSeries* conventional = table.find(Method::conventional, s.level);
        if (conventional == nullptr) continue;
        LevelComparison c;
        c.level = s.level;
        try {
            c.log_ratio = log_quantile_ratio(s.values, conventional->values);
        } catch (const EmptyComparisonError&) {
            c.log_ratio.reset();
        }
        report.comparisons.push_back(std::move(c));
    }

    if (!point_gammas.empty()) report.evi = evi_summary(point_gammas);
    return report;
}

json evi_summary_to_json(const EviSummary& summary) {
    return json{{"count", summary.count},
                {"median", summary.median},
                {"q1", summary.q1},
                {"q3", summary.q3},
                {"bin_width", EviSummary::kBinWidth},
                {"bins", summary.bins},
                {"overflow", summary.overflow}};
}

json report_to_json(const EvaluationReport& report) {
    json rows = json::array();
    for (const auto& e : report.per_method_level) {
        json row{{"method", std::string(method_name(e.method))},
                 {"level", e.level.value()},
                 {"exceedance_count", e.exceedance.count},
                 {"exceedance_rate", e.exceedance.rate},
                 {"n_test", e.exceedance.n},
                 {"fallback_count", e.fallback_count},
                 {"below_tail", e.below_tail}};
        if (e.mean_quantile_score) row["mean_quantile_score"] = *e.mean_quantile_score;
        rows.push_back(std::move(row));
    }
    json comparisons = json::array();
    for (const auto& c : report.comparisons) {
        json row{{"level", c.level.value()}};
        if (c.log_ratio) {
            row["log_ratio_mean"] = c.log_ratio->mean;
            row["log_ratio_median"] = c.log_ratio->median;
            row["compared"] = c.log_ratio->series.size();
            row["dropped"] = c.log_ratio->dropped;
            row["log_ratio_series"] = c.log_ratio->series;
        } else {
            row["log_ratio_mean"] = nullptr;
            row["log_ratio_median"] = nullptr;
        }
        comparisons.push_back(std::move(row));
    }
    json doc{{"n_test", report.n_test},
             {"crossing_repairs", report.crossing_repairs},
             {"methods", rows},
             {"comparisons", comparisons}};
    doc["evi_summary"] = report.evi ? evi_summary_to_json(*report.evi) : json(nullptr);
    return doc;
}

std::string exceedance_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << "method,level,exceedance_count,exceedance_rate,n_test,fallback_count,below_tail,mean_quantile_score\n";
    for (const auto& e : report.per_method_level) {
        out << method_name(e.method) << ',' << format_real(e.level.value()) << ',' << e.exceedance.count << ','
            << format_real(e.exceedance.rate) << ',' << e.exceedance.n << ',' << e.fallback_count << ','
            << (e.below_tail ? 1 : 0) << ',';
        if (e.mean_quantile_score) out << format_real(*e.mean_quantile_score);
        out << '\n';
    }
    return out.str();
}

std::string log_ratio_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << "level,index,log_ratio\n";
    for (const auto& c : report.comparisons) {
        if (!c.log_ratio) continue;
        for (std::size_t i = 0; i < c.log_ratio->series.size(); ++i) {
            out << format_real(c.level.value()) << ',' << i << ',' << format_real(c.log_ratio->series[i]) << '\n';
        }
    }
    return out.str();
}

std::string evi_histogram_csv(const EviSummary& summary) {
    std::ostringstream out;
    out << "bin_lower,bin_upper,count\n";
    for (std::size_t b = 0; b < summary.bins.size(); ++b) {
        out << format_real(static_cast<double>(b) * EviSummary::kBinWidth) << ','
            << format_real(static_cast<double>(b + 1) * EviSummary::kBinWidth) << ',' << summary.bins[b] << '\n';
    }
    out << "1," << "inf," << summary.overflow << '\n';
    return out.str();
}

}  // namespace exqr
