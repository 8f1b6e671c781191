#include <doctest.h>

#include <cmath>

#include "evi_oracle.hpp"

// The acceptance band for the pooled index is frozen from this Monte Carlo
// run; if the oracle changes, the band must be re-derived.
TEST_CASE("Hill Monte Carlo reference reproduces the frozen band") {
    const oracle::HillGrid grid{5000, 108, 2};
    const auto mc = oracle::hill_monte_carlo(grid, 0.25, 10001, 200);
    CHECK(mc.draws.size() == 200);
    CHECK(mc.median == doctest::Approx(0.23312968332902323).epsilon(1e-12));
    CHECK(mc.sd == doctest::Approx(0.022015610093239647).epsilon(1e-12));
    CHECK(mc.median - 4.0 * mc.sd == doctest::Approx(0.14506724295606464).epsilon(1e-12));
    CHECK(mc.median + 4.0 * mc.sd == doctest::Approx(0.3211921237019818).epsilon(1e-12));
}

TEST_CASE("Hill on exact Pareto order statistics concentrates near gamma") {
    const oracle::HillGrid grid{20000, 800, 2};
    const auto mc = oracle::hill_monte_carlo(grid, 0.5, 1, 20);
    CHECK(std::abs(mc.median - 0.5) < 0.05);
}
