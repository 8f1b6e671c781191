#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace exqr {

/// A probability level strictly inside (0, 1).
class QuantileLevel {
public:
    explicit QuantileLevel(double tau);

    double value() const noexcept { return tau_; }

    friend bool operator==(QuantileLevel a, QuantileLevel b) noexcept { return a.tau_ == b.tau_; }
    friend auto operator<=>(QuantileLevel a, QuantileLevel b) noexcept { return a.tau_ <=> b.tau_; }

private:
    double tau_;
};

/// Regression sample: an n x p covariate matrix and a response of length n.
///
/// The intercept is implicit and never stored in the design. Construction
/// rejects non-finite entries and samples with fewer than p + 2 rows.
class Dataset {
public:
    Dataset(Eigen::MatrixXd design, Eigen::VectorXd response);

    // Convenience for the single-covariate case.
    static Dataset from_columns(std::span<const double> covariate, std::span<const double> response);

    std::size_t n() const noexcept { return static_cast<std::size_t>(response_.size()); }
    std::size_t p() const noexcept { return static_cast<std::size_t>(design_.cols()); }

    const Eigen::MatrixXd& design() const noexcept { return design_; }
    const Eigen::VectorXd& response() const noexcept { return response_; }

    Dataset with_response(Eigen::VectorXd response) const;

private:
    Eigen::MatrixXd design_;
    Eigen::VectorXd response_;
};

/// Intercept and slope vector of a linear conditional quantile at one level.
struct LinearQuantileFit {
    QuantileLevel tau;
    double alpha = 0.0;
    Eigen::VectorXd beta;
    // Mean pinball loss over the training sample.
    double objective = 0.0;
};

struct SolverOptions {
    std::size_t max_iterations = 10000;
};

/// rho_tau(u) = u * (tau - 1{u <= 0}).
double pinball_loss(double u, QuantileLevel tau);

/// Mean pinball loss of the hyperplane (alpha, beta) over the sample, summed
/// left to right.
double mean_pinball_loss(const Dataset& data, double alpha, const Eigen::VectorXd& beta, QuantileLevel tau);

/// Exact linear quantile regression with intercept.
///
/// Walks between vertices of the piecewise-linear objective (hyperplanes
/// through p + 1 sample points), taking the steepest descending edge and an
/// exact line search along it. At a degenerate vertex, every edge spanned by
/// the zero-residual points is examined before optimality is declared, so the
/// returned objective is the global minimum up to floating-point rounding.
///
/// Throws DegenerateDesignError when [1, X] is rank deficient and
/// SolverFailureError when the iteration budget is exhausted.
LinearQuantileFit fit_quantile_regression(const Dataset& data, QuantileLevel tau, const SolverOptions& options = {});

/// Fits one model per level, in input order. Each fit is warm-started from
/// the previous level's solution. Levels must be strictly increasing.
std::vector<LinearQuantileFit> fit_quantile_path(const Dataset& data, std::span<const QuantileLevel> levels,
                                                 const SolverOptions& options = {});

double predict_linear(const LinearQuantileFit& fit, std::span<const double> x);
double predict_linear(const LinearQuantileFit& fit, const Eigen::VectorXd& x);

}  // namespace exqr
