#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "exqr/quantile_regression.hpp"

namespace exqr::synth {

/// Heavy-tailed regression law y = (a0 + a1 x) * (1 - U)^(-gamma) with
/// x ~ Uniform[0, 1] and U ~ Uniform[0, 1). Its conditional quantiles are
/// linear in x at every level.
struct SynthSpec {
    std::size_t n = 1000;
    double gamma = 0.25;
    double scale_intercept = 1.0;  // a0
    double scale_slope = 1.0;      // a1
    std::uint64_t seed = 1;

    void validate() const;
    double scale(double x) const { return scale_intercept + scale_slope * x; }
};

/// Seeded stream of doubles in [0, 1): mt19937_64 output, top 53 bits.
/// Both pieces are fixed by the C++ standard, so streams are identical on
/// every platform.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed);
    double next();

private:
    std::mt19937_64 engine_;
};

/// Seed for the index-th independent task derived from a base seed
/// (SplitMix64 finaliser applied to base + (index + 1) * golden gamma).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct SynthSample {
    Dataset data;
    std::vector<double> x;
    std::vector<double> u;
};

/// Draws (x_i, U_i) pairs in order i = 0..n-1, x first.
SynthSample generate(const SynthSpec& spec);

double true_conditional_quantile(double x, QuantileLevel tau, const SynthSpec& spec);

}  // namespace exqr::synth
