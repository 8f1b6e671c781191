#include "exqr/synth.hpp"

#include <cmath>
#include <string>

#include "exqr/errors.hpp"

namespace exqr::synth {

void SynthSpec::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInputError("synthetic gamma must be > 0");
    if (!(scale_intercept > 0.0) || !std::isfinite(scale_intercept)) {
        throw InvalidInputError("synthetic scale intercept must be > 0");
    }
    if (!(scale_slope >= 0.0) || !std::isfinite(scale_slope)) {
        throw InvalidInputError("synthetic scale slope must be >= 0");
    }
    if (n < 3) throw InvalidInputError("synthetic sample needs n >= 3, got " + std::to_string(n));
}

UniformStream::UniformStream(std::uint64_t seed) : engine_(seed) {}

double UniformStream::next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SynthSample generate(const SynthSpec& spec) {
    spec.validate();
    UniformStream stream(spec.seed);
    std::vector<double> x(spec.n), u(spec.n), y(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        x[i] = stream.next();
        u[i] = stream.next();
        y[i] = spec.scale(x[i]) * std::pow(1.0 - u[i], -spec.gamma);
    }
    return SynthSample{Dataset::from_columns(x, y), std::move(x), std::move(u)};
}

double true_conditional_quantile(double x, QuantileLevel tau, const SynthSpec& spec) {
    return spec.scale(x) * std::pow(1.0 - tau.value(), -spec.gamma);
}

}  // namespace exqr::synth
