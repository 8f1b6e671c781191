#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "exqr/errors.hpp"
#include "exqr/quantile_regression.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace exqr;

namespace {

Dataset to_dataset(const oracle::Instance& inst) {
    const auto n = static_cast<Eigen::Index>(inst.y.size());
    const auto p = static_cast<Eigen::Index>(inst.x.front().size());
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = inst.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        y(i) = inst.y[static_cast<std::size_t>(i)];
    }
    return Dataset(x, y);
}

Dataset three_points() {
    const std::vector<double> x{0.0, 1.0, 2.0};
    const std::vector<double> y{0.0, 1.0, 4.0};
    return Dataset::from_columns(x, y);
}

// N(r < 0) <= n tau <= N(r <= 0), with residuals within `zero` of 0 counted as 0.
void check_sign_condition(const Dataset& data, const LinearQuantileFit& fit) {
    const Eigen::VectorXd r = data.response() - ((data.design() * fit.beta).array() + fit.alpha).matrix();
    const double zero = 1e-9 * std::max(1.0, data.response().cwiseAbs().maxCoeff());
    std::size_t negative = 0;
    std::size_t non_positive = 0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (r(i) < -zero) ++negative;
        if (r(i) <= zero) ++non_positive;
    }
    const double target = static_cast<double>(data.n()) * fit.tau.value();
    CHECK(static_cast<double>(negative) <= target + 1e-9);
    CHECK(static_cast<double>(non_positive) >= target - 1e-9);
}

bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

TEST_CASE("quantile level rejects values outside (0, 1)") {
    CHECK_THROWS_AS(QuantileLevel(0.0), InvalidInputError);
    CHECK_THROWS_AS(QuantileLevel(1.0), InvalidInputError);
    CHECK_THROWS_AS(QuantileLevel(-0.2), InvalidInputError);
    CHECK_THROWS_AS(QuantileLevel(std::nan("")), InvalidInputError);
    CHECK(QuantileLevel(0.9999).value() == 0.9999);
}

TEST_CASE("dataset invariants") {
    Eigen::MatrixXd x(2, 1);
    x << 1.0, 2.0;
    CHECK_THROWS_AS(Dataset(x, Eigen::VectorXd::Ones(2)), InvalidInputError);  // n < p + 2
    Eigen::MatrixXd x3(3, 1);
    x3 << 1.0, std::numeric_limits<double>::infinity(), 2.0;
    CHECK_THROWS_AS(Dataset(x3, Eigen::VectorXd::Ones(3)), InvalidInputError);
    CHECK_THROWS_AS(Dataset(Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(3)), InvalidInputError);
}

TEST_CASE("pinball loss") {
    CHECK(pinball_loss(0.0, QuantileLevel(0.7)) == 0.0);
    CHECK(pinball_loss(2.0, QuantileLevel(0.5)) == doctest::Approx(1.0));
    CHECK(pinball_loss(1.0, QuantileLevel(0.9)) == doctest::Approx(0.9));
    CHECK(pinball_loss(-1.0, QuantileLevel(0.9)) == doctest::Approx(0.1));
    CHECK_THROWS_AS(pinball_loss(std::numeric_limits<double>::infinity(), QuantileLevel(0.5)), InvalidInputError);
    CHECK_THROWS_AS(pinball_loss(std::nan(""), QuantileLevel(0.5)), InvalidInputError);

    gen::Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const QuantileLevel tau(rng.uniform(0.01, 0.99));
        const double u = rng.uniform(-100.0, 100.0);
        const double c = rng.uniform(0.0, 50.0);
        CHECK(pinball_loss(u, tau) >= 0.0);
        CHECK(pinball_loss(c * u, tau) == doctest::Approx(c * pinball_loss(u, tau)).epsilon(1e-12));
    }
}

TEST_CASE("predict_linear") {
    LinearQuantileFit fit{QuantileLevel(0.5), 2.0, Eigen::VectorXd::Constant(1, 3.0), 0.0};
    CHECK(predict_linear(fit, std::vector<double>{1.0}) == 5.0);
    CHECK(predict_linear(fit, std::vector<double>{0.0}) == 2.0);
    LinearQuantileFit two{QuantileLevel(0.5), 0.0, Eigen::Vector2d(1.0, -1.0), 0.0};
    CHECK(predict_linear(two, std::vector<double>{4.0, 4.0}) == 0.0);
    CHECK_THROWS_AS(predict_linear(two, std::vector<double>{4.0}), InvalidInputError);
}

TEST_CASE("exact line is recovered at every level") {
    std::vector<double> x, y;
    for (int i = 0; i < 15; ++i) {
        x.push_back(0.3 * i - 1.0);
        y.push_back(2.0 + 3.0 * x.back());
    }
    const auto data = Dataset::from_columns(x, y);
    for (double tau : {0.05, 0.1, 0.5, 0.9, 0.97}) {
        const auto fit = fit_quantile_regression(data, QuantileLevel(tau));
        CHECK(fit.alpha == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit.beta(0) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(fit.objective == doctest::Approx(0.0).epsilon(1e-12));
    }
    const std::vector<QuantileLevel> levels{QuantileLevel(0.1), QuantileLevel(0.5), QuantileLevel(0.9)};
    for (const auto& fit : fit_quantile_path(data, levels)) {
        CHECK(fit.alpha == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit.beta(0) == doctest::Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("three-point median regression is y = 2x") {
    // Enumeration: lines through two of (0,0), (1,1), (2,4) have summed
    // losses 1 (y = x), 0.5 (y = 2x), 1 (y = 3x - 2); mean of the best is 1/6.
    const auto data = three_points();
    const auto fit = fit_quantile_regression(data, QuantileLevel(0.5));
    CHECK(fit.alpha == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.beta(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.objective == doctest::Approx(0.5 / 3.0).epsilon(1e-12));
    CHECK(fit.objective * 3.0 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("path on three points matches per-level enumeration") {
    const auto data = three_points();
    const oracle::Instance inst{{{0.0}, {1.0}, {2.0}}, {0.0, 1.0, 4.0}};
    const std::vector<QuantileLevel> levels{QuantileLevel(0.5), QuantileLevel(0.5 + 1e-3)};
    const auto fits = fit_quantile_path(data, levels);
    REQUIRE(fits.size() == 2);
    for (const auto& fit : fits) {
        const auto best = oracle::basis_enumeration(inst, fit.tau.value());
        CHECK(close_rel(fit.objective, best.objective, 1e-8));
    }
    const auto single = fit_quantile_path(data, std::vector<QuantileLevel>{QuantileLevel(0.3)});
    const auto direct = fit_quantile_regression(data, QuantileLevel(0.3));
    REQUIRE(single.size() == 1);
    CHECK(single[0].objective == direct.objective);
    CHECK(single[0].alpha == direct.alpha);
}

TEST_CASE("path rejects non-increasing levels") {
    const auto data = three_points();
    const std::vector<QuantileLevel> levels{QuantileLevel(0.5), QuantileLevel(0.5)};
    CHECK_THROWS_AS(fit_quantile_path(data, levels), InvalidInputError);
}

TEST_CASE("solver matches basis enumeration on random instances") {
    gen::Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t p = 1 + rng.index(2);
        const std::size_t n = p + 2 + rng.index(12 - p - 1);
        const auto inst = trial % 3 == 2 ? gen::tie_heavy_instance(rng, n, p) : gen::random_instance(rng, n, p);
        const Dataset data = to_dataset(inst);
        for (double tau : {0.1, 0.5, 0.9}) {
            LinearQuantileFit fit{QuantileLevel(tau), 0.0, Eigen::VectorXd(), 0.0};
            try {
                fit = fit_quantile_regression(data, QuantileLevel(tau));
            } catch (const DegenerateDesignError&) {
                continue;  // tie-heavy draws can have a constant column
            }
            const auto best = oracle::basis_enumeration(inst, tau);
            INFO("trial " << trial << " n=" << n << " p=" << p << " tau=" << tau);
            CHECK(fit.objective <= best.objective * (1.0 + 1e-8) + 1e-14);
            CHECK(fit.objective >= best.objective * (1.0 - 1e-8) - 1e-14);
            check_sign_condition(data, fit);
        }
    }
}

TEST_CASE("solver equivariance properties") {
    gen::Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const auto inst = gen::random_instance(rng, 30 + rng.index(40), 1 + rng.index(2));
        const Dataset data = to_dataset(inst);
        const QuantileLevel tau(rng.uniform(0.05, 0.95));
        const auto fit = fit_quantile_regression(data, tau);

        const double shift = rng.uniform(-20.0, 20.0);
        const auto shifted = fit_quantile_regression(data.with_response(data.response().array() + shift), tau);
        CHECK(close_rel(shifted.objective, fit.objective, 1e-8));

        const auto scaled = fit_quantile_regression(data.with_response(10.0 * data.response()), tau);
        CHECK(close_rel(scaled.objective, 10.0 * fit.objective, 1e-8));
        check_sign_condition(data, fit);
    }
}

TEST_CASE("scaling responses by 10 scales the coefficients") {
    const auto data = three_points();
    const auto fit = fit_quantile_regression(data.with_response(10.0 * data.response()), QuantileLevel(0.5));
    CHECK(fit.alpha == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.beta(0) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(fit.objective == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("constant response gives zero slope and the response value") {
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(std::sin(i));
        y.push_back(4.25);
    }
    const auto data = Dataset::from_columns(x, y);
    for (double tau : {0.1, 0.5, 0.99}) {
        const auto fit = fit_quantile_regression(data, QuantileLevel(tau));
        CHECK(fit.alpha == doctest::Approx(4.25).epsilon(1e-12));
        CHECK(fit.beta(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
        CHECK(fit.objective == 0.0);
    }
}

TEST_CASE("duplicated rows are legal") {
    std::vector<double> x, y;
    for (int rep = 0; rep < 4; ++rep) {
        for (int i = 0; i < 6; ++i) {
            x.push_back(i);
            y.push_back((i * 7) % 5);
        }
    }
    oracle::Instance inst;
    for (std::size_t i = 0; i < x.size(); ++i) {
        inst.x.push_back({x[i]});
        inst.y.push_back(y[i]);
    }
    const auto data = Dataset::from_columns(x, y);
    for (double tau : {0.2, 0.5, 0.8}) {
        const auto fit = fit_quantile_regression(data, QuantileLevel(tau));
        CHECK(close_rel(fit.objective, oracle::basis_enumeration(inst, tau).objective, 1e-8));
        check_sign_condition(data, fit);
    }
}

TEST_CASE("degenerate design and iteration budget errors") {
    std::vector<double> x(10, 3.0);
    std::vector<double> y{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK_THROWS_AS(fit_quantile_regression(Dataset::from_columns(x, y), QuantileLevel(0.5)), DegenerateDesignError);

    Eigen::MatrixXd collinear(6, 2);
    collinear << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
    CHECK_THROWS_AS(fit_quantile_regression(Dataset(collinear, Eigen::VectorXd::LinSpaced(6, 0, 5)), QuantileLevel(0.5)),
                    DegenerateDesignError);

    gen::Rng rng(3);
    const Dataset data = to_dataset(gen::random_instance(rng, 200, 2));
    try {
        fit_quantile_regression(data, QuantileLevel(0.7), SolverOptions{2});
        FAIL("expected a solver failure");
    } catch (const SolverFailureError& e) {
        CHECK(e.iterations() == 2);
    }
}
