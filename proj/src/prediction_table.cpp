#include "exqr/prediction_table.hpp"

#include <algorithm>

namespace exqr {

std::string_view method_name(Method m) { return m == Method::conventional ? "conventional" : "extremal"; }

std::optional<Method> parse_method(std::string_view name) {
    if (name == "conventional") return Method::conventional;
    if (name == "extremal") return Method::extremal;
    return std::nullopt;
}

std::size_t PredictionSeries::fallback_count() const {
    return static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), char{1}));
}

const PredictionSeries* PredictionTable::find(Method method, QuantileLevel level) const {
    for (const auto& s : series) {
        if (s.method == method && s.level == level) return &s;
    }
    return nullptr;
}

}  // namespace exqr
