#include "exqr/tail.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exqr/errors.hpp"

namespace exqr {

std::size_t integer_part_of_power(std::size_t n, double nu) {
    const double r = std::pow(static_cast<double>(n), nu);
    const double nearest = std::round(r);
    if (std::abs(r - nearest) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::floor(r));
}

TailConfig TailConfig::make(std::size_t n, std::size_t k, double nu) {
    TailConfig cfg{k, nu, n};
    cfg.validate();
    return cfg;
}

std::size_t TailConfig::trimmed() const { return integer_part_of_power(n, nu); }

void TailConfig::validate() const {
    if (!(nu > 0.0 && nu < 1.0)) throw InvalidConfigError("nu must lie in (0, 1), got " + std::to_string(nu));
    if (n < 2) throw InvalidConfigError("tail configuration needs n >= 2");
    if (k >= n) {
        throw InvalidConfigError("k = " + std::to_string(k) + " must be smaller than n = " + std::to_string(n));
    }
    const std::size_t f = trimmed();
    if (k < f + kMinTailWidth) {
        throw InsufficientTailWidthError("k = " + std::to_string(k) + " leaves a tail width below " +
                                         std::to_string(kMinTailWidth) + " (floor(n^nu) = " + std::to_string(f) +
                                         ")");
    }
}

LevelGrid intermediate_levels(std::size_t n, const TailConfig& cfg) {
    if (cfg.n != n) throw InvalidConfigError("tail configuration was built for a different sample size");
    cfg.validate();
    LevelGrid grid;
    grid.n = n;
    grid.first = n - cfg.k;
    grid.last = n - cfg.trimmed();
    const double denom = static_cast<double>(n + 1);
    grid.levels.reserve(grid.last - grid.first + 1);
    for (std::size_t j = grid.first; j <= grid.last; ++j) grid.levels.emplace_back(static_cast<double>(j) / denom);
    return grid;
}

QPath quantile_path(std::span<const LinearQuantileFit> fits, std::span<const double> x) {
    if (fits.empty()) throw InvalidInputError("quantile path needs at least one fit");
    QPath path;
    path.raw.reserve(fits.size());
    for (const auto& fit : fits) path.raw.push_back(predict_linear(fit, x));
    path.monotone = path.raw;
    std::sort(path.monotone.begin(), path.monotone.end());
    return path;
}

QPath quantile_path(std::span<const LinearQuantileFit> fits, const Eigen::VectorXd& x) {
    return quantile_path(fits, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

EviEstimate hill_estimate(const QPath& path, const TailConfig& cfg) {
    cfg.validate();
    const std::size_t width = cfg.tail_width();
    if (path.monotone.size() != width + 1) {
        throw InvalidInputError("quantile path has " + std::to_string(path.monotone.size()) +
                                " entries, expected " + std::to_string(width + 1));
    }
    EviEstimate est;
    est.k_used = cfg.k;
    if (!path.positive()) {
        est.excluded = true;
        return est;
    }
    const double base = path.base();
    double sum = 0.0;
    for (double q : path.monotone) sum += std::log(q / base);
    est.gamma = sum / static_cast<double>(width);
    return est;
}

std::vector<EviEstimate> hill_estimates(std::span<const LinearQuantileFit> fits, const Eigen::MatrixXd& design,
                                        const TailConfig& cfg) {
    std::vector<EviEstimate> out;
    out.reserve(static_cast<std::size_t>(design.rows()));
    Eigen::VectorXd x(design.cols());
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        x = design.row(i).transpose();
        out.push_back(hill_estimate(quantile_path(fits, x), cfg));
    }
    return out;
}

double pooled_evi(std::span<const EviEstimate> estimates) {
    if (estimates.empty()) throw InvalidInputError("pooled EVI of an empty set of estimates");
    double sum = 0.0;
    std::size_t included = 0;
    for (const auto& e : estimates) {
        if (e.excluded || !e.gamma) continue;
        sum += *e.gamma;
        ++included;
    }
    const std::size_t excluded = estimates.size() - included;
    if (2 * excluded > estimates.size()) {
        throw TailDegeneracyError(std::to_string(excluded) + " of " + std::to_string(estimates.size()) +
                                      " covariate points have a non-positive intermediate quantile base",
                                  excluded, estimates.size());
    }
    return sum / static_cast<double>(included);
}

double weissman_extrapolate(double q_base, QuantileLevel tau_base, QuantileLevel tau_target, double gamma) {
    if (tau_target < tau_base) throw InvalidDirectionError("target level lies below the extrapolation base level");
    if (!(q_base > 0.0) || !std::isfinite(q_base)) throw InvalidBaseError("extrapolation base must be positive");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidInputError("extreme value index must be >= 0");
    return std::pow((1.0 - tau_base.value()) / (1.0 - tau_target.value()), gamma) * q_base;
}

std::vector<std::size_t> default_k_candidates(std::size_t n, double nu) {
    const std::size_t f = integer_part_of_power(n, nu);
    const std::size_t start = std::max<std::size_t>(f + TailConfig::kMinTailWidth, 20);
    const std::size_t stop = n / 4;
    std::vector<std::size_t> out;
    for (std::size_t k = start; k <= stop; k += 5) out.push_back(k);
    if (out.empty()) out.push_back(f + TailConfig::kMinTailWidth);
    return out;
}

namespace {

std::optional<double> candidate_mse(std::span<const LinearQuantileFit> fits, const Dataset& data,
                                    const TailConfig& cfg) {
    const auto estimates = hill_estimates(fits, data.design(), cfg);
    double gamma = 0.0;
    try {
        gamma = pooled_evi(estimates);
    } catch (const TailDegeneracyError&) {
        return std::nullopt;
    }
    const std::size_t len = fits.size();
    const std::size_t band = std::max<std::size_t>(1, len / 4);
    const QuantileLevel tau_base = fits.front().tau;

    double sum = 0.0;
    std::size_t count = 0;
    Eigen::VectorXd x(data.design().cols());
    for (Eigen::Index i = 0; i < data.design().rows(); ++i) {
        if (estimates[static_cast<std::size_t>(i)].excluded) continue;
        x = data.design().row(i).transpose();
        const QPath path = quantile_path(fits, x);
        for (std::size_t j = len - band; j < len; ++j) {
            const double diff = weissman_extrapolate(path.base(), tau_base, fits[j].tau, gamma) - path.monotone[j];
            sum += diff * diff;
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

}  // namespace

std::size_t select_k(const Dataset& data, std::span<const std::size_t> candidates, double nu,
                     const SolverOptions& options, std::vector<KCandidateScore>* scores) {
    if (candidates.empty()) throw InvalidInputError("select_k needs at least one candidate");
    const std::size_t n = data.n();
    for (std::size_t k : candidates) TailConfig::make(n, k, nu);

    std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() == 1) {
        if (scores) scores->assign(1, KCandidateScore{sorted.front(), std::nullopt});
        return sorted.front();
    }

    // Every candidate grid ends at m, so the widest grid contains all others
    // as suffixes and is fitted once.
    const auto widest = intermediate_levels(n, TailConfig::make(n, sorted.back(), nu));
    const auto all_fits = fit_quantile_path(data, widest.levels, options);

    std::optional<std::size_t> best_k;
    double best_mse = 0.0;
    if (scores) scores->clear();
    for (std::size_t k : sorted) {
        const auto cfg = TailConfig::make(n, k, nu);
        const std::size_t len = cfg.tail_width() + 1;
        const std::span<const LinearQuantileFit> fits(all_fits.data() + (all_fits.size() - len), len);
        const auto mse = candidate_mse(fits, data, cfg);
        if (scores) scores->push_back({k, mse});
        if (mse && (!best_k || *mse < best_mse)) {
            best_k = k;
            best_mse = *mse;
        }
    }
    if (!best_k) {
        throw TailDegeneracyError("every k candidate is tail-degenerate", data.n(), data.n());
    }
    return *best_k;
}

}  // namespace exqr
