#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "exqr/prediction_table.hpp"
#include "exqr/quantile_regression.hpp"
#include "exqr/tail.hpp"

namespace exqr {

/// Levels reported by default: moderate, high and extreme.
std::vector<QuantileLevel> default_target_levels();

struct ExtremalOptions {
    // Empty selects k with select_k over default_k_candidates.
    std::optional<std::size_t> k;
    double nu = 0.1;
    std::vector<QuantileLevel> target_levels = default_target_levels();
    SolverOptions solver;
};

/// Fitted extremal quantile regression: the intermediate-level fit grid, the
/// pooled extreme value index and the conventional fits at the target levels.
/// Immutable once built.
class ExtremalQRModel {
public:
    static constexpr int kSchemaVersion = 1;

    ExtremalQRModel(TailConfig cfg, LevelGrid grid, std::vector<LinearQuantileFit> fits, double gamma_pool,
                    std::size_t excluded_count, std::vector<QuantileLevel> target_levels,
                    std::vector<LinearQuantileFit> conventional_fits);

    const TailConfig& config() const noexcept { return cfg_; }
    const LevelGrid& grid() const noexcept { return grid_; }
    std::span<const LinearQuantileFit> fits() const noexcept { return fits_; }
    double gamma_pool() const noexcept { return gamma_pool_; }
    std::size_t excluded_count() const noexcept { return excluded_count_; }
    const std::vector<QuantileLevel>& target_levels() const noexcept { return target_levels_; }
    std::span<const LinearQuantileFit> conventional_fits() const noexcept { return conventional_fits_; }
    int schema_version() const noexcept { return kSchemaVersion; }

    std::size_t n() const noexcept { return cfg_.n; }
    std::size_t p() const noexcept { return static_cast<std::size_t>(fits_.front().beta.size()); }
    QuantileLevel tau_base() const { return grid_.base(); }

    // Conventional fit at exactly this level, if one was stored.
    const LinearQuantileFit* conventional_fit(QuantileLevel tau) const;

    friend bool operator==(const ExtremalQRModel& a, const ExtremalQRModel& b);

private:
    TailConfig cfg_;
    LevelGrid grid_;
    std::vector<LinearQuantileFit> fits_;
    double gamma_pool_;
    std::size_t excluded_count_;
    std::vector<QuantileLevel> target_levels_;
    std::vector<LinearQuantileFit> conventional_fits_;
};

bool operator==(const LinearQuantileFit& a, const LinearQuantileFit& b);

/// Fits the intermediate grid, pools the Hill estimates over every training
/// row and fits conventional QR at each target level.
///
/// Throws TailDegeneracyError when half or more of the training rows have a
/// non-positive intermediate base.
ExtremalQRModel fit_extremal(const Dataset& train, const ExtremalOptions& options = {});

/// Per-row Hill estimates of the model's grid evaluated at `design` rows.
std::vector<EviEstimate> point_evi_estimates(const ExtremalQRModel& model, const Eigen::MatrixXd& design);

struct ExtremePrediction {
    double value = 0.0;
    // True when the point's intermediate base was non-positive and the value
    // is the conventional prediction instead.
    bool fallback = false;
};

/// Weissman extrapolation of the point's rearranged base quantile with the
/// pooled index. Throws BelowTailError for tau below the base level.
ExtremePrediction predict_extreme(const ExtremalQRModel& model, std::span<const double> x, QuantileLevel tau);
ExtremePrediction predict_extreme(const ExtremalQRModel& model, const Eigen::VectorXd& x, QuantileLevel tau);

/// Conventional QR prediction from a fresh fit on `train`.
double predict_conventional(const Dataset& train, std::span<const double> x, QuantileLevel tau,
                            const SolverOptions& options = {});

/// Conventional QR prediction from the model's stored fit at `tau`, which
/// must be one of its target levels.
double predict_conventional(const ExtremalQRModel& model, std::span<const double> x, QuantileLevel tau);

/// Predictions at every row of `design` for each requested method and every
/// target level of the model. Extremal levels below the base level are
/// served by the conventional fit and flagged as below_tail; extremal values
/// are rearranged across levels wherever they cross.
PredictionTable predict_table(const ExtremalQRModel& model, const Eigen::MatrixXd& design,
                              std::span<const Method> methods);

/// JSON model file. Reals are written with shortest round-trip precision.
std::string serialize_model(const ExtremalQRModel& model);

/// Throws VersionError for an unknown schema_version and ParseError naming
/// the first missing or malformed field.
ExtremalQRModel deserialize_model(std::string_view bytes);

}  // namespace exqr
