#pragma once

// Slow ground-truth routines that share no code with the tape or projection
// paths: exhaustive search over a simplex grid, an independent simplex
// projection and plain-arithmetic loss evaluation.

#include <cstdint>
#include <functional>
#include <span>

#include "mpo/common.hpp"
#include "mpo/data.hpp"
#include "mpo/engine.hpp"

namespace mpo::oracle {

inline constexpr std::uint64_t kMaxCompositions = 10'000'000;

struct GridResult {
    Vector weights;
    double value = 0.0;
    std::uint64_t evaluated = 0;
};

/// C(units + n - 1, n - 1), saturating at UINT64_MAX.
std::uint64_t composition_count(std::size_t n, std::size_t units);

/// Minimizes `objective` over every w on the simplex with coordinates in
/// multiples of `step`. Enumeration is lexicographically descending; the first
/// minimum wins ties. Throws ConfigError if the grid exceeds `limit` points.
GridResult simplex_grid_search(const std::function<double(std::span<const double>)>& objective, std::size_t n,
                               double step, std::uint64_t limit = kMaxCompositions);

/// argmin over the simplex of ||w - z||^2, ascending-sort formulation.
Vector euclidean_simplex_projection(std::span<const double> z);

// Plain statistics (population normalization).
double mean(std::span<const double> x);
double stddev(std::span<const double> x);
/// Linear interpolation between order statistics at rank q * (T - 1), q in [0, 1].
double quantile(std::span<const double> x, double q);
double cvar(std::span<const double> R, double alpha);

/// The weighted loss of `spec` at weights w, computed without the tape.
double direct_loss(const engine::LossSpec& spec, const data::ReturnsPanel& panel, std::span<const double> w);
/// Only the objective terms of `spec`.
double direct_objective(const engine::LossSpec& spec, const data::ReturnsPanel& panel, std::span<const double> w);

}  // namespace mpo::oracle
