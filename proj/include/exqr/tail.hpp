#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "exqr/quantile_regression.hpp"

namespace exqr {

/// Number of upper intermediate levels (k) and the exponent nu that trims the
/// most extreme levels, for a sample of size n.
struct TailConfig {
    std::size_t k = 0;
    double nu = 0.1;
    std::size_t n = 0;

    /// Validated construction. Requires nu in (0, 1), k < n and a tail width
    /// k - floor(n^nu) of at least kMinTailWidth.
    static TailConfig make(std::size_t n, std::size_t k, double nu = 0.1);

    void validate() const;

    // floor(n^nu)
    std::size_t trimmed() const;
    std::size_t tail_width() const { return k - trimmed(); }

    static constexpr std::size_t kMinTailWidth = 5;
};

/// floor(n^nu), snapped to the nearest integer when pow() lands within
/// rounding distance of it.
std::size_t integer_part_of_power(std::size_t n, double nu);

/// Levels tau_j = j / (n + 1) for j = n - k, ..., m with m = n - floor(n^nu).
struct LevelGrid {
    std::size_t n = 0;
    std::size_t first = 0;  // n - k
    std::size_t last = 0;   // m
    std::vector<QuantileLevel> levels;

    std::size_t size() const noexcept { return levels.size(); }
    QuantileLevel base() const { return levels.front(); }
};

LevelGrid intermediate_levels(std::size_t n, const TailConfig& cfg);

/// Intermediate quantile predictions at one covariate point, ordered by level.
struct QPath {
    std::vector<double> raw;
    // raw sorted ascending; repairs quantile crossing.
    std::vector<double> monotone;

    double base() const { return monotone.front(); }
    bool positive() const { return base() > 0.0; }
};

QPath quantile_path(std::span<const LinearQuantileFit> fits, std::span<const double> x);
QPath quantile_path(std::span<const LinearQuantileFit> fits, const Eigen::VectorXd& x);

struct EviEstimate {
    std::optional<double> gamma;  // empty when excluded
    std::size_t k_used = 0;
    bool excluded = false;
};

/// Hill-type extreme value index from the rearranged path:
/// (1 / (k - floor(n^nu))) * sum_j log(q_{n-j} / q_{n-k}).
/// A path with a non-positive base is reported as excluded.
EviEstimate hill_estimate(const QPath& path, const TailConfig& cfg);

/// Hill estimates at every row of `design`.
std::vector<EviEstimate> hill_estimates(std::span<const LinearQuantileFit> fits, const Eigen::MatrixXd& design,
                                        const TailConfig& cfg);

/// Mean of the non-excluded estimates, summed left to right. Throws
/// TailDegeneracyError when more than half are excluded.
double pooled_evi(std::span<const EviEstimate> estimates);

/// ((1 - tau_base) / (1 - tau_target))^gamma * q_base.
double weissman_extrapolate(double q_base, QuantileLevel tau_base, QuantileLevel tau_target, double gamma);

/// Value of the k-selection criterion for one candidate, or empty when that
/// candidate's pooled estimate is tail-degenerate.
struct KCandidateScore {
    std::size_t k = 0;
    std::optional<double> mse;
};

/// Chooses k among `candidates` by how well Weissman extrapolation from the
/// candidate's base level reproduces the directly fitted quantiles in the
/// top quarter of its own grid (mean squared difference over training rows
/// and band levels). Ties go to the smaller k.
std::size_t select_k(const Dataset& data, std::span<const std::size_t> candidates, double nu,
                     const SolverOptions& options = {}, std::vector<KCandidateScore>* scores = nullptr);

/// Candidates max(floor(n^nu) + 5, 20), ..., floor(n / 4) in steps of 5.
std::vector<std::size_t> default_k_candidates(std::size_t n, double nu);

}  // namespace exqr
