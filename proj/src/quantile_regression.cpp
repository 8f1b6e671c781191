#include "exqr/quantile_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "exqr/errors.hpp"

namespace exqr {

QuantileLevel::QuantileLevel(double tau) : tau_(tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        std::ostringstream msg;
        msg << "quantile level must lie in (0, 1), got " << tau;
        throw InvalidInputError(msg.str());
    }
}

Dataset::Dataset(Eigen::MatrixXd design, Eigen::VectorXd response)
    : design_(std::move(design)), response_(std::move(response)) {
    if (design_.rows() != response_.size()) {
        throw InvalidInputError("design has " + std::to_string(design_.rows()) + " rows but response has " +
                                std::to_string(response_.size()));
    }
    if (design_.cols() < 1) throw InvalidInputError("design needs at least one covariate column");
    if (n() < p() + 2) {
        throw InvalidInputError("need at least p + 2 = " + std::to_string(p() + 2) + " samples, got " +
                                std::to_string(n()));
    }
    if (!design_.allFinite() || !response_.allFinite()) throw InvalidInputError("dataset contains non-finite values");
}

Dataset Dataset::from_columns(std::span<const double> covariate, std::span<const double> response) {
    if (covariate.size() != response.size()) throw InvalidInputError("covariate and response lengths differ");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(covariate.size()), 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(response.size()));
    for (std::size_t i = 0; i < covariate.size(); ++i) {
        x(static_cast<Eigen::Index>(i), 0) = covariate[i];
        y(static_cast<Eigen::Index>(i)) = response[i];
    }
    return Dataset(std::move(x), std::move(y));
}

Dataset Dataset::with_response(Eigen::VectorXd response) const { return Dataset(design_, std::move(response)); }

double pinball_loss(double u, QuantileLevel tau) {
    if (!std::isfinite(u)) throw InvalidInputError("pinball loss of a non-finite residual");
    return u * (tau.value() - (u <= 0.0 ? 1.0 : 0.0));
}

double mean_pinball_loss(const Dataset& data, double alpha, const Eigen::VectorXd& beta, QuantileLevel tau) {
    if (static_cast<std::size_t>(beta.size()) != data.p()) throw InvalidInputError("beta length does not match p");
    const Eigen::VectorXd fitted = (data.design() * beta).array() + alpha;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < fitted.size(); ++i) sum += pinball_loss(data.response()(i) - fitted(i), tau);
    return sum / static_cast<double>(data.n());
}

namespace {

constexpr double kZeroResidualRel = 1e-10;
constexpr double kSlopeRel = 1e-11;

double rho(double u, double tau) { return u * (tau - (u <= 0.0 ? 1.0 : 0.0)); }

struct Step {
    double t;
    Eigen::Index index;
};

class VertexDescent {
public:
    VertexDescent(const Dataset& data, double tau, const SolverOptions& options)
        : y_(data.response()), tau_(tau), options_(options), n_(y_.size()),
          d_(static_cast<Eigen::Index>(data.p()) + 1) {
        z_.resize(n_, d_);
        z_.col(0).setOnes();
        z_.rightCols(d_ - 1) = data.design();
        const double ymax = y_.cwiseAbs().maxCoeff();
        tol_ = kZeroResidualRel * std::max(ymax, std::numeric_limits<double>::min());
        is_zero_.resize(static_cast<std::size_t>(n_));
    }

    Eigen::VectorXd intercept_only_start() const {
        std::vector<double> sorted(y_.data(), y_.data() + n_);
        std::sort(sorted.begin(), sorted.end());
        auto idx = static_cast<std::ptrdiff_t>(std::ceil(static_cast<double>(n_) * tau_)) - 1;
        idx = std::clamp<std::ptrdiff_t>(idx, 0, n_ - 1);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(d_);
        b(0) = sorted[static_cast<std::size_t>(idx)];
        return b;
    }

    Eigen::VectorXd solve(Eigen::VectorXd b) {
        for (std::size_t iter = 1;; ++iter) {
            if (iter > options_.max_iterations) {
                throw SolverFailureError("quantile regression did not converge within " +
                                             std::to_string(options_.max_iterations) + " iterations",
                                         options_.max_iterations);
            }
            iterations_ = iter;
            refresh_residuals(b);

            std::vector<Eigen::Index> basis;
            Eigen::MatrixXd span_basis;
            independent_rows(zero_, basis, span_basis);

            if (static_cast<Eigen::Index>(basis.size()) < d_) {
                // Not yet a vertex: slide along a direction that keeps the
                // current zero residuals at zero until another one appears.
                Eigen::VectorXd dir = complement_direction(span_basis);
                Eigen::VectorXd u = z_ * dir;
                double s = slope(u, 1.0);
                if (s > 0.0) {
                    dir = -dir;
                    u = -u;
                    s = -s;
                }
                const auto step = line_search(u, s);
                if (!step) throw SolverFailureError("objective unbounded along a feasible direction", iter);
                basis.push_back(step->index);
                if (static_cast<Eigen::Index>(basis.size()) == d_) {
                    b = interpolate(basis);
                } else {
                    b += step->t * dir;
                }
                continue;
            }

            if (static_cast<Eigen::Index>(zero_.size()) == n_) return b;

            if (auto next = edge_move(basis)) {
                b = std::move(*next);
                continue;
            }
            if (static_cast<Eigen::Index>(zero_.size()) > d_) {
                if (auto next = degenerate_move()) {
                    b = std::move(*next);
                    continue;
                }
            }
            return b;
        }
    }

    std::size_t iterations() const noexcept { return iterations_; }

private:
    void refresh_residuals(const Eigen::VectorXd& b) {
        r_ = y_ - z_ * b;
        zero_.clear();
        for (Eigen::Index i = 0; i < n_; ++i) {
            const bool z = std::abs(r_(i)) <= tol_;
            is_zero_[static_cast<std::size_t>(i)] = z;
            if (z) zero_.push_back(i);
        }
    }

    // Greedy Gram-Schmidt over the rows of z_ indexed by `candidates`;
    // returns the selected indices and an orthonormal basis of their span.
    void independent_rows(const std::vector<Eigen::Index>& candidates, std::vector<Eigen::Index>& picked,
                          Eigen::MatrixXd& ortho) const {
        ortho.resize(d_, 0);
        for (Eigen::Index i : candidates) {
            if (static_cast<Eigen::Index>(picked.size()) == d_) break;
            Eigen::VectorXd v = z_.row(i).transpose();
            const double norm0 = v.norm();
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index c = 0; c < ortho.cols(); ++c) v -= ortho.col(c).dot(v) * ortho.col(c);
            }
            const double norm = v.norm();
            if (norm > 1e-9 * norm0) {
                ortho.conservativeResize(Eigen::NoChange, ortho.cols() + 1);
                ortho.col(ortho.cols() - 1) = v / norm;
                picked.push_back(i);
            }
        }
    }

    Eigen::VectorXd complement_direction(const Eigen::MatrixXd& ortho) const {
        Eigen::VectorXd best;
        double best_norm = -1.0;
        for (Eigen::Index k = 0; k < d_; ++k) {
            Eigen::VectorXd v = Eigen::VectorXd::Unit(d_, k);
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index c = 0; c < ortho.cols(); ++c) v -= ortho.col(c).dot(v) * ortho.col(c);
            }
            const double norm = v.norm();
            if (norm > best_norm) {
                best_norm = norm;
                best = v / norm;
            }
        }
        return best;
    }

    Eigen::VectorXd interpolate(const std::vector<Eigen::Index>& rows) const {
        Eigen::MatrixXd a(d_, d_);
        Eigen::VectorXd rhs(d_);
        for (Eigen::Index k = 0; k < d_; ++k) {
            a.row(k) = z_.row(rows[static_cast<std::size_t>(k)]);
            rhs(k) = y_(rows[static_cast<std::size_t>(k)]);
        }
        return a.fullPivLu().solve(rhs);
    }

    // One-sided derivative at t = 0+ of f(b + t * sign * dir), with u = z_ * dir.
    double slope(const Eigen::VectorXd& u, double sign) const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i) {
            const double ui = sign * u(i);
            if (is_zero_[static_cast<std::size_t>(i)]) {
                s += rho(-ui, tau_);
            } else if (r_(i) > 0.0) {
                s -= tau_ * ui;
            } else {
                s += (1.0 - tau_) * ui;
            }
        }
        return s;
    }

    double slope_tolerance(const Eigen::VectorXd& u) const { return kSlopeRel * u.cwiseAbs().sum(); }

    // Exact minimisation of the convex piecewise-linear objective along
    // b + t * dir, t > 0, given the initial slope. Returns the breakpoint at
    // which the accumulated slope first becomes non-negative.
    std::optional<Step> line_search(const Eigen::VectorXd& u, double slope0) {
        breaks_.clear();
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (is_zero_[static_cast<std::size_t>(i)] || u(i) == 0.0) continue;
            const double t = r_(i) / u(i);
            if (t > 0.0) breaks_.push_back({t, std::abs(u(i)), i});
        }
        std::sort(breaks_.begin(), breaks_.end(), [](const Break& a, const Break& b) {
            return a.t < b.t || (a.t == b.t && a.index < b.index);
        });
        double s = slope0;
        for (const auto& br : breaks_) {
            s += br.weight;
            if (s >= 0.0) return Step{br.t, br.index};
        }
        return std::nullopt;
    }

    std::optional<Eigen::VectorXd> edge_move(const std::vector<Eigen::Index>& basis) {
        Eigen::MatrixXd a(d_, d_);
        for (Eigen::Index k = 0; k < d_; ++k) a.row(k) = z_.row(basis[static_cast<std::size_t>(k)]);
        const Eigen::MatrixXd inv = a.fullPivLu().inverse();

        double best_slope = 0.0;
        Eigen::Index best_h = -1;
        double best_sign = 1.0;
        Eigen::VectorXd best_u;
        for (Eigen::Index h = 0; h < d_; ++h) {
            Eigen::VectorXd u = z_ * inv.col(h);
            const double tol = slope_tolerance(u);
            for (double sign : {1.0, -1.0}) {
                const double s = slope(u, sign);
                if (s < -tol && s < best_slope) {
                    best_slope = s;
                    best_h = h;
                    best_sign = sign;
                    best_u = u;
                }
            }
        }
        if (best_h < 0) return std::nullopt;

        const Eigen::VectorXd u = best_sign * best_u;
        const auto step = line_search(u, best_slope);
        if (!step) throw SolverFailureError("objective unbounded along a basis edge", iterations_);
        std::vector<Eigen::Index> next = basis;
        next[static_cast<std::size_t>(best_h)] = step->index;
        return interpolate(next);
    }

    // At a vertex with more than p + 1 zero residuals the basis edges do not
    // generate every descent direction. The extreme rays of the local cone
    // are the null directions of every rank-(d-1) subset of distinct zero
    // rows, so examining all of them certifies optimality.
    std::optional<Eigen::VectorXd> degenerate_move() {
        std::vector<Eigen::Index> distinct = distinct_zero_rows();
        const auto m = static_cast<Eigen::Index>(distinct.size());
        const Eigen::Index choose = d_ - 1;
        if (m < choose) return std::nullopt;

        std::vector<Eigen::Index> comb(static_cast<std::size_t>(choose));
        std::iota(comb.begin(), comb.end(), Eigen::Index{0});
        Eigen::MatrixXd a(choose, d_);
        while (true) {
            for (Eigen::Index k = 0; k < choose; ++k) {
                a.row(k) = z_.row(distinct[static_cast<std::size_t>(comb[static_cast<std::size_t>(k)])]);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
            if (lu.rank() == choose) {
                const Eigen::VectorXd dir = lu.kernel().col(0).normalized();
                const Eigen::VectorXd u = z_ * dir;
                const double tol = slope_tolerance(u);
                for (double sign : {1.0, -1.0}) {
                    const double s = slope(u, sign);
                    if (s < -tol) {
                        const auto step = line_search(sign * u, s);
                        if (!step) throw SolverFailureError("objective unbounded at a degenerate vertex", iterations_);
                        std::vector<Eigen::Index> next;
                        for (auto c : comb) next.push_back(distinct[static_cast<std::size_t>(c)]);
                        next.push_back(step->index);
                        return interpolate(next);
                    }
                }
            }
            // Advance to the next combination in lexicographic order.
            Eigen::Index k = choose - 1;
            while (k >= 0 && comb[static_cast<std::size_t>(k)] == m - choose + k) --k;
            if (k < 0) break;
            ++comb[static_cast<std::size_t>(k)];
            for (Eigen::Index j = k + 1; j < choose; ++j) {
                comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
            }
        }
        return std::nullopt;
    }

    // Zero-residual rows with duplicate (or sign-flipped) directions collapse
    // to one representative; they define the same hyperplane through b.
    std::vector<Eigen::Index> distinct_zero_rows() const {
        std::vector<std::pair<Eigen::VectorXd, Eigen::Index>> rows;
        for (Eigen::Index i : zero_) {
            Eigen::VectorXd v = z_.row(i).transpose().normalized();
            Eigen::Index lead = 0;
            while (lead < d_ && v(lead) == 0.0) ++lead;
            if (lead < d_ && v(lead) < 0.0) v = -v;
            rows.emplace_back(std::move(v), i);
        }
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return std::lexicographical_compare(a.first.data(), a.first.data() + a.first.size(), b.first.data(),
                                                b.first.data() + b.first.size());
        });
        std::vector<Eigen::Index> out;
        const Eigen::VectorXd* prev = nullptr;
        for (const auto& [v, i] : rows) {
            if (prev == nullptr || (v - *prev).cwiseAbs().maxCoeff() > 1e-12) {
                out.push_back(i);
                prev = &v;
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    struct Break {
        double t;
        double weight;
        Eigen::Index index;
    };

    const Eigen::VectorXd& y_;
    double tau_;
    SolverOptions options_;
    Eigen::Index n_;
    Eigen::Index d_;
    Eigen::MatrixXd z_;
    double tol_ = 0.0;

    Eigen::VectorXd r_;
    std::vector<char> is_zero_;
    std::vector<Eigen::Index> zero_;
    std::vector<Break> breaks_;
    std::size_t iterations_ = 0;
};

void check_design_rank(const Dataset& data) {
    Eigen::MatrixXd centered = data.design().rowwise() - data.design().colwise().mean();
    const double scale = centered.cwiseAbs().maxCoeff();
    if (scale == 0.0) throw DegenerateDesignError("every covariate column is constant");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(centered / scale);
    qr.setThreshold(1e-12);
    if (static_cast<std::size_t>(qr.rank()) < data.p()) {
        throw DegenerateDesignError("covariate columns are collinear with the intercept or each other");
    }
}

LinearQuantileFit make_fit(const Dataset& data, QuantileLevel tau, const Eigen::VectorXd& b) {
    LinearQuantileFit fit{tau, b(0), b.tail(b.size() - 1), 0.0};
    fit.objective = mean_pinball_loss(data, fit.alpha, fit.beta, tau);
    return fit;
}

std::string level_text(QuantileLevel tau) {
    std::ostringstream s;
    s.precision(17);
    s << tau.value();
    return s.str();
}

}  // namespace

LinearQuantileFit fit_quantile_regression(const Dataset& data, QuantileLevel tau, const SolverOptions& options) {
    check_design_rank(data);
    VertexDescent solver(data, tau.value(), options);
    return make_fit(data, tau, solver.solve(solver.intercept_only_start()));
}

std::vector<LinearQuantileFit> fit_quantile_path(const Dataset& data, std::span<const QuantileLevel> levels,
                                                 const SolverOptions& options) {
    for (std::size_t j = 1; j < levels.size(); ++j) {
        if (!(levels[j - 1] < levels[j])) throw InvalidInputError("quantile levels must be strictly increasing");
    }
    check_design_rank(data);

    std::vector<LinearQuantileFit> fits;
    fits.reserve(levels.size());
    std::optional<Eigen::VectorXd> warm;
    for (QuantileLevel tau : levels) {
        VertexDescent solver(data, tau.value(), options);
        Eigen::VectorXd b;
        try {
            b = solver.solve(warm ? *warm : solver.intercept_only_start());
        } catch (const SolverFailureError& e) {
            throw SolverFailureError("at level " + level_text(tau) + ": " + e.what(), e.iterations());
        }
        warm = b;
        fits.push_back(make_fit(data, tau, b));
    }
    return fits;
}

double predict_linear(const LinearQuantileFit& fit, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(fit.beta.size())) {
        throw InvalidInputError("covariate vector has length " + std::to_string(x.size()) + ", expected " +
                                std::to_string(fit.beta.size()));
    }
    double value = fit.alpha;
    for (std::size_t i = 0; i < x.size(); ++i) value += x[i] * fit.beta(static_cast<Eigen::Index>(i));
    return value;
}

double predict_linear(const LinearQuantileFit& fit, const Eigen::VectorXd& x) {
    return predict_linear(fit, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

}  // namespace exqr
