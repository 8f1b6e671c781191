#include "exqr/extremal_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exqr/errors.hpp"

namespace exqr {

std::vector<QuantileLevel> default_target_levels() {
    return {QuantileLevel(0.97), QuantileLevel(0.999), QuantileLevel(0.9999)};
}

namespace {

std::vector<QuantileLevel> sorted_unique(std::vector<QuantileLevel> levels) {
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    return levels;
}

}  // namespace

ExtremalQRModel::ExtremalQRModel(TailConfig cfg, LevelGrid grid, std::vector<LinearQuantileFit> fits,
                                 double gamma_pool, std::size_t excluded_count,
                                 std::vector<QuantileLevel> target_levels,
                                 std::vector<LinearQuantileFit> conventional_fits)
    : cfg_(cfg), grid_(std::move(grid)), fits_(std::move(fits)), gamma_pool_(gamma_pool),
      excluded_count_(excluded_count), target_levels_(std::move(target_levels)),
      conventional_fits_(std::move(conventional_fits)) {
    cfg_.validate();
    if (fits_.empty() || fits_.size() != grid_.size()) {
        throw InvalidInputError("model needs one intermediate fit per grid level");
    }
    for (std::size_t j = 0; j < fits_.size(); ++j) {
        if (fits_[j].tau != grid_.levels[j]) throw InvalidInputError("intermediate fits are not aligned with the grid");
        if (fits_[j].beta.size() != fits_.front().beta.size()) {
            throw InvalidInputError("intermediate fits disagree on the covariate count");
        }
    }
    if (!(gamma_pool_ >= 0.0) || !std::isfinite(gamma_pool_)) {
        throw InvalidInputError("pooled extreme value index must be finite and >= 0");
    }
    if (2 * excluded_count_ >= cfg_.n) throw InvalidInputError("excluded_count must be below n / 2");
    if (conventional_fits_.size() != target_levels_.size()) {
        throw InvalidInputError("model needs one conventional fit per target level");
    }
    for (std::size_t j = 0; j < target_levels_.size(); ++j) {
        if (conventional_fits_[j].tau != target_levels_[j]) {
            throw InvalidInputError("conventional fits are not aligned with the target levels");
        }
        if (j > 0 && !(target_levels_[j - 1] < target_levels_[j])) {
            throw InvalidInputError("target levels must be strictly increasing");
        }
    }
}

const LinearQuantileFit* ExtremalQRModel::conventional_fit(QuantileLevel tau) const {
    for (const auto& fit : conventional_fits_) {
        if (fit.tau == tau) return &fit;
    }
    return nullptr;
}

bool operator==(const LinearQuantileFit& a, const LinearQuantileFit& b) {
    return a.tau == b.tau && a.alpha == b.alpha && a.beta == b.beta && a.objective == b.objective;
}

bool operator==(const ExtremalQRModel& a, const ExtremalQRModel& b) {
    return a.cfg_.k == b.cfg_.k && a.cfg_.nu == b.cfg_.nu && a.cfg_.n == b.cfg_.n &&
           a.grid_.levels == b.grid_.levels && a.grid_.first == b.grid_.first && a.grid_.last == b.grid_.last &&
           a.fits_ == b.fits_ && a.gamma_pool_ == b.gamma_pool_ && a.excluded_count_ == b.excluded_count_ &&
           a.target_levels_ == b.target_levels_ && a.conventional_fits_ == b.conventional_fits_;
}

ExtremalQRModel fit_extremal(const Dataset& train, const ExtremalOptions& options) {
    const std::size_t n = train.n();
    std::size_t k = 0;
    if (options.k) {
        k = *options.k;
    } else {
        const auto candidates = default_k_candidates(n, options.nu);
        k = select_k(train, candidates, options.nu, options.solver);
    }
    const TailConfig cfg = TailConfig::make(n, k, options.nu);
    LevelGrid grid = intermediate_levels(n, cfg);
    auto fits = fit_quantile_path(train, grid.levels, options.solver);

    const auto estimates = hill_estimates(fits, train.design(), cfg);
    const auto excluded = static_cast<std::size_t>(
        std::count_if(estimates.begin(), estimates.end(), [](const EviEstimate& e) { return e.excluded; }));
    if (2 * excluded >= n) {
        throw TailDegeneracyError(std::to_string(excluded) + " of " + std::to_string(n) +
                                      " training points have a non-positive intermediate quantile base",
                                  excluded, n);
    }
    const double gamma = pooled_evi(estimates);

    auto targets = sorted_unique(options.target_levels);
    auto conventional = fit_quantile_path(train, targets, options.solver);
    return ExtremalQRModel(cfg, std::move(grid), std::move(fits), gamma, excluded, std::move(targets),
                           std::move(conventional));
}

std::vector<EviEstimate> point_evi_estimates(const ExtremalQRModel& model, const Eigen::MatrixXd& design) {
    if (static_cast<std::size_t>(design.cols()) != model.p()) {
        throw InvalidInputError("design has " + std::to_string(design.cols()) + " columns, model expects " +
                                std::to_string(model.p()));
    }
    return hill_estimates(model.fits(), design, model.config());
}

ExtremePrediction predict_extreme(const ExtremalQRModel& model, std::span<const double> x, QuantileLevel tau) {
    if (tau < model.tau_base()) {
        throw BelowTailError("level " + std::to_string(tau.value()) + " lies below the extrapolation base " +
                                 std::to_string(model.tau_base().value()) + "; use conventional quantile regression",
                             tau.value(), model.tau_base().value());
    }
    const QPath path = quantile_path(model.fits(), x);
    if (!path.positive()) return ExtremePrediction{predict_conventional(model, x, tau), true};
    return ExtremePrediction{weissman_extrapolate(path.base(), model.tau_base(), tau, model.gamma_pool()), false};
}

ExtremePrediction predict_extreme(const ExtremalQRModel& model, const Eigen::VectorXd& x, QuantileLevel tau) {
    return predict_extreme(model, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), tau);
}

double predict_conventional(const Dataset& train, std::span<const double> x, QuantileLevel tau,
                            const SolverOptions& options) {
    return predict_linear(fit_quantile_regression(train, tau, options), x);
}

double predict_conventional(const ExtremalQRModel& model, std::span<const double> x, QuantileLevel tau) {
    const LinearQuantileFit* fit = model.conventional_fit(tau);
    if (fit == nullptr) {
        throw InvalidInputError("model stores no conventional fit at level " + std::to_string(tau.value()));
    }
    return predict_linear(*fit, x);
}

PredictionTable predict_table(const ExtremalQRModel& model, const Eigen::MatrixXd& design,
                              std::span<const Method> methods) {
    if (static_cast<std::size_t>(design.cols()) != model.p()) {
        throw InvalidInputError("design has " + std::to_string(design.cols()) + " columns, model expects " +
                                std::to_string(model.p()));
    }
    const auto points = static_cast<std::size_t>(design.rows());
    PredictionTable table;
    table.points = points;

    std::vector<Method> ordered(methods.begin(), methods.end());
    std::sort(ordered.begin(), ordered.end());
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

    Eigen::VectorXd x(design.cols());
    for (Method method : ordered) {
        const std::size_t first = table.series.size();
        for (const auto& level : model.target_levels()) {
            PredictionSeries s;
            s.method = method;
            s.level = level;
            s.values.resize(points);
            s.fallback.assign(points, 0);
            s.below_tail = method == Method::extremal && level < model.tau_base();
            for (std::size_t i = 0; i < points; ++i) {
                x = design.row(static_cast<Eigen::Index>(i)).transpose();
                const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
                if (method == Method::conventional || s.below_tail) {
                    s.values[i] = predict_conventional(model, xs, level);
                    s.fallback[i] = s.below_tail ? 1 : 0;
                } else {
                    const auto pred = predict_extreme(model, xs, level);
                    s.values[i] = pred.value;
                    s.fallback[i] = pred.fallback ? 1 : 0;
                }
            }
            table.series.push_back(std::move(s));
        }
        if (method != Method::extremal) continue;
        std::vector<double> column;
        for (std::size_t i = 0; i < points; ++i) {
            column.clear();
            for (std::size_t j = first; j < table.series.size(); ++j) column.push_back(table.series[j].values[i]);
            if (std::is_sorted(column.begin(), column.end())) continue;
            std::sort(column.begin(), column.end());
            for (std::size_t j = first; j < table.series.size(); ++j) table.series[j].values[i] = column[j - first];
            ++table.crossing_repairs;
        }
    }
    return table;
}

}  // namespace exqr
