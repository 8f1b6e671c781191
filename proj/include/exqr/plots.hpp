#pragma once

#include <span>
#include <string>

#include "exqr/evaluation.hpp"
#include "exqr/prediction_table.hpp"

namespace exqr {

/// Standalone SVG bar chart of an EVI histogram with the median marked.
std::string svg_evi_histogram(const EviSummary& summary, const std::string& title);

/// Observed test series with every prediction series drawn over it, on a
/// log10 axis.
std::string svg_prediction_series(std::span<const double> observed, const PredictionTable& table,
                                  const std::string& title);

}  // namespace exqr
