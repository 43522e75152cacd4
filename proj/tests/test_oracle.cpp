#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "mpo/oracle.hpp"
#include "support.hpp"

using namespace mpo;
using namespace mpo::oracle;
using Catch::Matchers::WithinAbs;

TEST_CASE("composition counts") {
    CHECK(composition_count(3, 2) == 6);
    CHECK(composition_count(1, 100) == 1);
    CHECK(composition_count(2, 100) == 101);
    CHECK(composition_count(4, 100) == 176851);  // C(103, 3)
    CHECK(composition_count(5, 100) == 4598126);  // C(104, 4)
    CHECK(composition_count(0, 5) == 0);
    CHECK(composition_count(400, 400) == std::numeric_limits<std::uint64_t>::max());
}

TEST_CASE("grid enumeration order is lexicographically descending") {
    std::vector<Vector> seen;
    const auto r = simplex_grid_search(
        [&](std::span<const double> w) {
            seen.emplace_back(w.begin(), w.end());
            return 0.0;
        },
        3, 0.5);
    const std::vector<Vector> want{{1, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, 0.5}, {0, 1, 0}, {0, 0.5, 0.5}, {0, 0, 1}};
    CHECK(seen == want);
    CHECK(r.evaluated == 6);
    CHECK(r.weights == Vector{1, 0, 0});  // first minimum wins ties
}

TEST_CASE("grid search ties keep the first point") {
    const auto r = simplex_grid_search([](std::span<const double>) { return 1.0; }, 2, 0.5);
    CHECK(r.weights == Vector{1.0, 0.0});
    CHECK(r.value == 1.0);
    const auto one = simplex_grid_search([](std::span<const double> w) { return w[0]; }, 1, 0.1);
    CHECK(one.weights == Vector{1.0});
}

TEST_CASE("grid search visits every point exactly once") {
    for (std::size_t n = 1; n <= 5; ++n) {
        for (double step : {1.0, 0.5, 0.25, 0.1}) {
            std::set<std::vector<long>> pts;
            const auto r = simplex_grid_search(
                [&](std::span<const double> w) {
                    std::vector<long> k;
                    double s = 0.0;
                    for (double v : w) {
                        k.push_back(std::lround(v / step));
                        s += v;
                    }
                    CHECK_THAT(s, WithinAbs(1.0, 1e-12));
                    pts.insert(k);
                    return 0.0;
                },
                n, step);
            CHECK(pts.size() == r.evaluated);
            CHECK(r.evaluated == composition_count(n, static_cast<std::size_t>(std::lround(1.0 / step))));
        }
    }
}

TEST_CASE("grid search finds the nearest grid point of a quadratic") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 50; ++trial) {
        // Targets on the 0.1 grid: the grid minimum is the target itself.
        Vector target(4, 0.0);
        std::uniform_int_distribution<int> pick(0, 3);
        for (int u = 0; u < 10; ++u) target[pick(rng)] += 0.1;
        const auto r = simplex_grid_search(
            [&](std::span<const double> w) {
                double d = 0.0;
                for (std::size_t i = 0; i < 4; ++i) d += (w[i] - target[i]) * (w[i] - target[i]);
                return d;
            },
            4, 0.1);
        CHECK(testing::max_abs_diff(r.weights, target) < 1e-12);
        CHECK(r.value < 1e-24);
    }
}

TEST_CASE("grid search argument checks") {
    auto zero = [](std::span<const double>) { return 0.0; };
    CHECK_THROWS_AS(simplex_grid_search(zero, 3, 0.3), ConfigError);
    CHECK_THROWS_AS(simplex_grid_search(zero, 3, 0.0), ConfigError);
    CHECK_THROWS_AS(simplex_grid_search(zero, 3, 1.5), ConfigError);
    CHECK_THROWS_AS(simplex_grid_search(zero, 0, 0.1), ConfigError);
    CHECK_THROWS_AS(simplex_grid_search(zero, 50, 0.01), ConfigError);
    CHECK_THROWS_AS(simplex_grid_search(zero, 3, 0.01, 100), ConfigError);
    CHECK_THROWS_AS(simplex_grid_search([](std::span<const double>) { return std::nan(""); }, 2, 0.5),
                    EvaluationError);
}

TEST_CASE("independent projection examples") {
    CHECK(testing::max_abs_diff(euclidean_simplex_projection(Vector{1.0, 0.5, -1.0}), Vector{0.75, 0.25, 0.0}) < 1e-15);
    CHECK(euclidean_simplex_projection(Vector{0.2, 0.3, 0.5}) == Vector{0.2, 0.3, 0.5});
    CHECK(euclidean_simplex_projection(Vector{3.0, 3.0}) == Vector{0.5, 0.5});
    CHECK(euclidean_simplex_projection(Vector{-4.0}) == Vector{1.0});
}

TEST_CASE("reference statistics") {
    const Vector x{-0.04, -0.01, 0.02, 0.03};
    CHECK_THAT(mean(x), WithinAbs(0.0, 1e-17));
    CHECK_THAT(quantile(x, 0.25), WithinAbs(-0.0175, 1e-16));
    CHECK(quantile(x, 0.0) == -0.04);
    CHECK(quantile(x, 1.0) == 0.03);
    CHECK_THAT(cvar(Vector{-0.1, 0.1}, 0.5), WithinAbs(0.1, 1e-16));
    CHECK_THAT(stddev(Vector{0.01, 0.03}), WithinAbs(0.01, 1e-17));
}

TEST_CASE("direct loss sums weighted terms") {
    const auto panel = testing::random_panel(3, 50, 107);
    engine::LossSpec spec;
    spec.objectives = {testing::term(engine::TermKind::Volatility, 2.0)};
    spec.constraints = {testing::term(engine::TermKind::Ucits10, 3.0)};
    const Vector w{0.5, 0.3, 0.2};
    const Vector R = testing::portfolio(panel, w);
    CHECK_THAT(direct_loss(spec, panel, w), WithinAbs(2.0 * stddev(R) + 3.0 * (0.4 + 0.2 + 0.1), 1e-14));
    CHECK_THAT(direct_objective(spec, panel, w), WithinAbs(2.0 * stddev(R), 1e-15));
    CHECK_THROWS_AS(direct_loss(spec, panel, Vector{1.0}), InputError);
}
