#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "mpo/finance.hpp"
#include "support.hpp"

using namespace mpo;
using namespace mpo::finance;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// Evaluates a scalar graph built on constant returns / weights.
template <class Build>
double on_series(const Vector& x, Build build) {
    tape::Graph g;
    return g.forward(build(g.constant(x)))[0];
}

template <class Build>
double on_pair(const Vector& a, const Vector& b, Build build) {
    tape::Graph g;
    return g.forward(build(g.constant(a), g.constant(b)))[0];
}

}  // namespace

TEST_CASE("mean-variance examples") {
    CHECK_THAT(on_series({0.02, 0.02}, [](auto R) { return mean_variance_objective(R, 1.0); }), WithinAbs(-0.02, 1e-17));
    CHECK_THAT(on_series({0.01, 0.03}, [](auto R) { return mean_variance_objective(R, 0.0); }), WithinAbs(-0.02, 1e-17));
    CHECK_THAT(on_series({0.01, 0.03}, [](auto R) { return mean_variance_objective(R, 100.0); }),
               WithinAbs(-0.01, 1e-15));
}

TEST_CASE("sharpe examples") {
    CHECK_THAT(on_series({0.01, 0.03}, [](auto R) { return sharpe_ratio(R, 0.0); }), WithinRel(2.0, 1e-14));
    CHECK_THAT(on_series({0.01, 0.03}, [](auto R) { return sharpe_ratio(R, 0.02); }), WithinAbs(0.0, 1e-15));
    try {
        on_series({0.02, 0.02, 0.02}, [](auto R) { return sharpe_ratio(R, 0.0); });
        FAIL("expected an evaluation error");
    } catch (const EvaluationError& e) {
        CHECK(std::string(e.what()).find("degenerate portfolio volatility") != std::string::npos);
    }
}

TEST_CASE("value at risk examples") {
    CHECK_THAT(on_series({-0.04, -0.01, 0.02, 0.03}, [](auto R) { return value_at_risk(R, 0.25); }),
               WithinAbs(0.0175, 1e-16));
    CHECK_THAT(oracle::quantile(Vector{-0.04, -0.01, 0.02, 0.03}, 0.25), WithinAbs(-0.0175, 1e-16));
    CHECK(on_series({0.013, 0.013, 0.013}, [](auto R) { return value_at_risk(R, 0.05); }) == -0.013);
    CHECK_THAT(on_series({-0.1, 0.1}, [](auto R) { return value_at_risk(R, 0.5); }), WithinAbs(0.0, 1e-17));
}

TEST_CASE("cvar examples") {
    CHECK_THAT(on_series({-0.1, 0.1}, [](auto R) { return cvar(R, 0.5); }), WithinAbs(0.1, 1e-16));
    CHECK(on_series({0.013, 0.013, 0.013}, [](auto R) { return cvar(R, 0.05); }) == -0.013);
}

TEST_CASE("cvar bounds var and matches the sort-based closed form at exact ranks") {
    std::mt19937_64 rng(29);
    std::uniform_int_distribution<std::size_t> len(2, 300);
    std::uniform_real_distribution<double> a(0.01, 0.99);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vector R = testing::random_vector(rng, len(rng), 0.01);
        const double alpha = a(rng);
        const double var = on_series(R, [&](auto x) { return value_at_risk(x, alpha); });
        const double cv = on_series(R, [&](auto x) { return cvar(x, alpha); });
        CHECK(cv >= var);
        CHECK_THAT(cv, WithinAbs(oracle::cvar(R, alpha), 1e-14));
    }
    // alpha * (T - 1) = r integer: VaR is the r-th order statistic and
    // CVaR = -R(r) (1 - r / (alpha T)) - sum_{j<r} R(j) / (alpha T).
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t T = 21 + 20 * (trial % 5);
        const std::size_t r = 1 + trial % 4;
        const double alpha = static_cast<double>(r) / static_cast<double>(T - 1);
        Vector R = testing::random_vector(rng, T, 0.01);
        const double cv = on_series(R, [&](auto x) { return cvar(x, alpha); });
        std::sort(R.begin(), R.end());
        const double aT = alpha * static_cast<double>(T);
        double tail = 0.0;
        for (std::size_t j = 0; j < r; ++j) tail += R[j];
        CHECK_THAT(cv, WithinAbs(-R[r] * (1.0 - static_cast<double>(r) / aT) - tail / aT, 1e-14));
    }
}

TEST_CASE("tracking error examples and translation invariance") {
    const Vector I{0.01, -0.02, 0.005, 0.03};
    CHECK(on_pair(I, I, [](auto R, auto B) { return tracking_error(R, B); }) == 0.0);
    Vector shifted = I;
    for (auto& v : shifted) v += 0.004;
    CHECK_THAT(on_pair(shifted, I, [](auto R, auto B) { return tracking_error(R, B); }), WithinAbs(0.0, 1e-17));
    CHECK_THAT(on_pair({0.01, -0.01}, {0.0, 0.0}, [](auto R, auto B) { return tracking_error(R, B); }),
               WithinAbs(0.01, 1e-17));
    CHECK_THROWS_AS(on_pair({0.01, 0.02}, {0.0, 0.0, 0.0}, [](auto R, auto B) { return tracking_error(R, B); }),
                    InputError);

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const Vector R = testing::random_vector(rng, 50, 0.01);
        const Vector B = testing::random_vector(rng, 50, 0.01);
        Vector R2 = R, B2 = B;
        const double c = testing::random_vector(rng, 1, 0.05)[0];
        for (std::size_t t = 0; t < 50; ++t) {
            R2[t] += c;
            B2[t] += c;
        }
        CHECK_THAT(on_pair(R2, B2, [](auto x, auto y) { return tracking_error(x, y); }),
                   WithinAbs(on_pair(R, B, [](auto x, auto y) { return tracking_error(x, y); }), 1e-15));
    }
}

TEST_CASE("tracking-error penalty examples") {
    // R - I = [0.02, -0.02] -> TE 0.02.
    CHECK_THAT(on_pair({0.02, -0.02}, {0.0, 0.0}, [](auto R, auto B) { return constraint_te(R, B, 0.004); }),
               WithinAbs(0.016, 1e-16));
    CHECK(on_pair({0.001, -0.001}, {0.0, 0.0}, [](auto R, auto B) { return constraint_te(R, B, 0.004); }) == 0.0);
}

TEST_CASE("ucits penalty examples") {
    CHECK_THAT(on_series({0.15, 0.05, 0.80}, [](auto w) { return constraint_ucits_10(w); }), WithinAbs(0.75, 1e-15));
    CHECK(on_series({0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1}, [](auto w) { return constraint_ucits_10(w); }) ==
          0.0);
    CHECK_THAT(on_series({1.0, 0.0, 0.0}, [](auto w) { return constraint_ucits_10(w); }), WithinAbs(0.9, 1e-16));

    CHECK_THAT(on_series({0.30, 0.20, 0.06, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04},
                         [](auto w) { return constraint_ucits_5_40(w); }),
               WithinAbs(0.16, 1e-15));
    Vector flat(20, 0.05);
    CHECK(on_series(flat, [](auto w) { return constraint_ucits_5_40(w); }) == 0.0);
}

TEST_CASE("min-weight penalty examples") {
    CHECK_THAT(on_series({0.005, 0.02, 0.975}, [](auto w) { return constraint_min_weight(w, 0.01); }),
               WithinAbs(0.005, 1e-17));
    CHECK(on_series({0.3, 0.3, 0.4}, [](auto w) { return constraint_min_weight(w, 0.01); }) == 0.0);
    CHECK(on_series({0.0, 0.5, 0.5}, [](auto w) { return constraint_min_weight(w, 0.01); }) == 0.0);
}

TEST_CASE("count-range penalty examples") {
    auto with_active = [](std::size_t k, std::size_t n) {
        Vector w(n, 0.0);
        for (std::size_t i = 0; i < k; ++i) w[i] = 1.0 / static_cast<double>(k);
        return w;
    };
    CHECK(on_series(with_active(23, 40), [](auto w) { return constraint_count_range(w, 20, 30); }) == 0.0);
    CHECK(on_series(with_active(35, 40), [](auto w) { return constraint_count_range(w, 20, 30); }) == 75.0);
    CHECK(on_series(with_active(10, 40), [](auto w) { return constraint_count_range(w, 20, 30); }) == 200.0);
    CHECK(active_count(with_active(10, 40)) == 10);
    tape::Graph g;
    CHECK_THROWS(constraint_count_range(g.constant(with_active(3, 5)), 3, 6));
    CHECK_THROWS(constraint_count_range(g.constant(with_active(3, 5)), 0, 2));
}

TEST_CASE("group-mask penalty examples") {
    GroupMaskSet all;
    all.membership = Matrix(4, 1, 1.0);
    all.max_weight = {1.0};
    CHECK_THAT(on_series({0.1, 0.2, 0.3, 0.4}, [&](auto w) { return constraint_group_mask(w, all); }),
               WithinAbs(0.0, 1e-16));

    GroupMaskSet none;
    none.membership = Matrix(4, 1, 0.0);
    none.max_weight = {0.3};
    CHECK(on_series({0.1, 0.2, 0.3, 0.4}, [&](auto w) { return constraint_group_mask(w, none); }) == 0.3);

    GroupMaskSet bad;
    bad.membership = Matrix(3, 1, 1.0);
    bad.max_weight = {0.3};
    tape::Graph g;
    CHECK_THROWS_AS(constraint_group_mask(g.constant(Vector{0.5, 0.5, 0.0, 0.0}), bad), InputError);
}

TEST_CASE("volatility examples") {
    CHECK(on_series({0.02, 0.02, 0.02}, [](auto R) { return volatility(R); }) == 0.0);
    CHECK_THAT(on_series({0.01, 0.03}, [](auto R) { return volatility(R); }), WithinAbs(0.01, 1e-17));
    std::mt19937_64 rng(37);
    const Vector R = testing::random_vector(rng, 100, 0.01);
    Vector scaled = R;
    for (auto& v : scaled) v *= -3.0;
    CHECK_THAT(on_series(scaled, [](auto x) { return volatility(x); }),
               WithinRel(3.0 * on_series(R, [](auto x) { return volatility(x); }), 1e-13));
}

TEST_CASE("statistics reject series shorter than two periods") {
    tape::Graph g;
    auto one = g.constant(Vector{0.01});
    CHECK_THROWS_AS(volatility(one), InputError);
    CHECK_THROWS_AS(cvar(one, 0.05), InputError);
    auto two = g.constant(Vector{0.01, 0.02});
    CHECK_THROWS_AS(cvar(two, 1.0), InputError);
    CHECK_THROWS_AS(value_at_risk(two, 0.0), InputError);
}

TEST_CASE("penalties are nonnegative and vanish on compliant portfolios") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 1000; ++trial) {
        // Random portfolio: nonnegativity of every penalty.
        const Vector w = testing::random_simplex(rng, 2 + trial % 40, 0.5);
        const std::size_t n = w.size();
        CHECK(on_series(w, [](auto x) { return constraint_ucits_10(x); }) >= 0.0);
        CHECK(on_series(w, [](auto x) { return constraint_ucits_5_40(x); }) >= 0.0);
        CHECK(on_series(w, [](auto x) { return constraint_min_weight(x, 0.01); }) >= 0.0);
        CHECK(on_series(w, [&](auto x) { return constraint_count_range(x, 1, static_cast<int>(n)); }) == 0.0);

        // UCITS-compliant: 20 assets at 5% or less, plus a few between 5% and 10% capped at 40% in aggregate.
        Vector c(24, 0.0);
        for (std::size_t i = 0; i < 4; ++i) c[i] = 0.09;
        const double rest = (1.0 - 0.36) / 20.0;
        for (std::size_t i = 4; i < 24; ++i) c[i] = rest;
        std::shuffle(c.begin(), c.end(), rng);
        CHECK(on_series(c, [](auto x) { return constraint_ucits_10(x); }) == 0.0);
        CHECK(on_series(c, [](auto x) { return constraint_ucits_5_40(x); }) == 0.0);
        CHECK(on_series(c, [](auto x) { return constraint_min_weight(x, 0.01); }) == 0.0);

        // Group targets equal to the achieved group weights.
        GroupMaskSet groups;
        groups.membership = Matrix(24, 3);
        std::bernoulli_distribution in(0.3);
        for (auto& v : groups.membership.data) v = in(rng) ? 1.0 : 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < 24; ++i) s += c[i] * groups.membership(i, j);
            groups.max_weight.push_back(s);
        }
        CHECK(on_series(c, [&](auto x) { return constraint_group_mask(x, groups); }) <= 1e-15);
    }
}

TEST_CASE("metrics bundle") {
    const auto panel = testing::random_panel(5, 60, 43);
    const Vector w{0.2, 0.2, 0.2, 0.2, 0.2};
    const Metrics m = compute_metrics(panel.returns, panel.benchmark, w);
    const Vector R = testing::portfolio(panel, w);
    CHECK_THAT(m.volatility, WithinRel(oracle::stddev(R), 1e-12));
    CHECK_THAT(m.sharpe, WithinRel(oracle::mean(R) / oracle::stddev(R), 1e-12));
    CHECK_THAT(m.cvar, WithinRel(oracle::cvar(R, 0.05), 1e-12));
    CHECK_THAT(m.var, WithinRel(-oracle::quantile(R, 0.05), 1e-12));
    REQUIRE(m.tracking_error.has_value());
    CHECK(*m.tracking_error < 1e-15);  // the benchmark is the equal-weight portfolio

    Matrix flat(3, 2, 0.01);
    const Metrics z = compute_metrics(flat, std::nullopt, Vector{0.5, 0.5});
    CHECK(z.sharpe == 0.0);
    CHECK(z.volatility == 0.0);
    CHECK_FALSE(z.tracking_error.has_value());
}
