#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exqr/quantile_regression.hpp"

namespace exqr {

enum class Method { conventional, extremal };

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);

/// Predicted quantiles of one (method, level) pair over consecutive points.
struct PredictionSeries {
    Method method = Method::conventional;
    QuantileLevel level{0.5};
    std::vector<double> values;
    // Per point: the extremal method served a conventional value (level below
    // the extrapolation base, or non-positive intermediate base).
    std::vector<char> fallback;
    bool below_tail = false;

    std::size_t fallback_count() const;
};

/// All prediction series for one test period, ordered by method then level.
struct PredictionTable {
    std::size_t points = 0;
    std::vector<PredictionSeries> series;
    // Points at which extremal values had to be reordered across levels.
    std::size_t crossing_repairs = 0;

    const PredictionSeries* find(Method method, QuantileLevel level) const;
};

}  // namespace exqr
