#pragma once

// Maps unconstrained pre-weights onto the probability simplex and provides
// the straight-through binary masks used by the count/threshold penalties.

#include <optional>
#include <string_view>

#include "mpo/common.hpp"
#include "mpo/tape.hpp"

namespace mpo::projection {

enum class Kind { Softmax, Sparsemax };

std::string_view to_string(Kind kind);
std::optional<Kind> parse_kind(std::string_view name);

/// Offset the masks apply on the strict side of the threshold.
inline constexpr double kMaskEpsilon = 1e-16;

/// Max-shifted softmax; every entry strictly positive.
Vector softmax(std::span<const double> z);

/// Euclidean projection onto the simplex via the descending-sort threshold rule.
Vector sparsemax(std::span<const double> z);

/// Upstream restricted to the support of sparsemax(z), minus its mean over the support.
Vector sparsemax_jacobian_vector_product(std::span<const double> z, std::span<const double> upstream);

/// Forward value of the rounded sigmoid. decimals == 0 yields exactly {0, 1}
/// with round-half-up, so x == 0 maps to 1.
double round_sigmoid_value(double x, int decimals);

/// Surrogate derivative sigmoid(x) * (1 - sigmoid(x)).
double round_sigmoid_surrogate(double x);

double sigmoid(double x);

// Graph builders.

tape::Expr softmax(tape::Expr z);
tape::Expr sparsemax(tape::Expr z);
tape::Expr project(Kind kind, tape::Expr z);

/// 1 where x > threshold + eps, else 0; straight-through gradient.
tape::Expr mask_above(tape::Expr x, double threshold);
/// 1 where x < threshold - eps, else 0; straight-through gradient.
tape::Expr mask_below(tape::Expr x, double threshold);

// Value-level mask helpers matching the graph builders exactly.
Vector mask_above(std::span<const double> x, double threshold);
Vector mask_below(std::span<const double> x, double threshold);

}  // namespace mpo::projection
