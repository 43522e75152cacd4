#pragma once

// Shared generators and reference helpers for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mpo/data.hpp"
#include "mpo/engine.hpp"
#include "mpo/oracle.hpp"

namespace mpo::testing {

/// Dirichlet(alpha, ..., alpha) sample via normalized gamma draws.
inline Vector random_simplex(std::mt19937_64& rng, std::size_t n, double alpha = 1.0) {
    std::gamma_distribution<double> g(alpha, 1.0);
    Vector w(n);
    double s = 0.0;
    for (auto& v : w) s += (v = g(rng));
    for (auto& v : w) v /= s;
    return w;
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Vector z(n);
    for (auto& v : z) v = d(rng);
    return z;
}

inline data::ReturnsPanel random_panel(std::size_t n, std::size_t T, std::uint64_t seed, std::size_t factors = 2) {
    return data::synthesize(data::random_market_spec(n, T, factors, seed));
}

inline engine::Term term(engine::TermKind kind, double lambda = 1.0) {
    engine::Term t;
    t.kind = kind;
    t.lambda = lambda;
    t.label = std::string(engine::to_string(kind));
    return t;
}

/// A spec holding just `t`. A lone constraint gets a zero-weight volatility
/// objective so the spec validates without changing the loss.
inline engine::LossSpec single(engine::Term t) {
    engine::LossSpec s;
    if (engine::is_objective(t.kind)) {
        s.objectives.push_back(std::move(t));
    } else {
        s.objectives.push_back(term(engine::TermKind::Volatility, 0.0));
        s.constraints.push_back(std::move(t));
    }
    return s;
}

/// Portfolio returns with plain loops.
inline Vector portfolio(const data::ReturnsPanel& p, const Vector& w) {
    Vector R(p.periods(), 0.0);
    for (std::size_t t = 0; t < p.periods(); ++t)
        for (std::size_t i = 0; i < w.size(); ++i) R[t] += w[i] * p.returns(t, i);
    return R;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const Vector& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

/// max_i |a_i - b_i| relative to the larger gradient's max-norm (absolute below 1e-8).
inline double relative_error(const Vector& got, const Vector& want) {
    const double scale = std::max({max_abs(got), max_abs(want), 1e-8});
    return max_abs_diff(got, want) / scale;
}

/// Tape gradient of spec's loss with respect to the weights themselves.
inline Vector tape_gradient(const engine::LossSpec& spec, const data::ReturnsPanel& panel, const Vector& w) {
    tape::Graph g;
    const tape::Expr x = g.input(w.size(), "w");
    const auto loss = engine::compose_loss_on_weights(spec, panel, x);
    g.bind(x, w);
    g.forward(loss.total);
    g.backward(loss.total);
    return g.gradient(x);
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace mpo::testing
