#include "mpo/projection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mpo::projection {

std::string_view to_string(Kind kind) { return kind == Kind::Softmax ? "softmax" : "sparsemax"; }

std::optional<Kind> parse_kind(std::string_view name) {
    if (name == "softmax") return Kind::Softmax;
    if (name == "sparsemax") return Kind::Sparsemax;
    return std::nullopt;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector softmax(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    Vector w(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        w[i] = std::exp(z[i] - m);
        s += w[i];
    }
    for (double& v : w) v /= s;
    return w;
}

namespace {

double sparsemax_threshold(std::span<const double> z) {
    Vector sorted(z.begin(), z.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumsum = 0.0;
    double support_sum = 0.0;
    std::size_t k = 0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        cumsum += sorted[j];
        if (1.0 + static_cast<double>(j + 1) * sorted[j] > cumsum) {
            k = j + 1;
            support_sum = cumsum;
        }
    }
    return (support_sum - 1.0) / static_cast<double>(k);
}

}  // namespace

Vector sparsemax(std::span<const double> z) {
    const double tau = sparsemax_threshold(z);
    Vector w(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) w[i] = std::max(z[i] - tau, 0.0);
    return w;
}

Vector sparsemax_jacobian_vector_product(std::span<const double> z, std::span<const double> upstream) {
    if (z.size() != upstream.size()) throw InputError("sparsemax JVP: length mismatch");
    const Vector w = sparsemax(z);
    double s = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] > 0.0) {
            s += upstream[i];
            ++k;
        }
    const double avg = s / static_cast<double>(k);
    Vector out(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] > 0.0) out[i] = upstream[i] - avg;
    return out;
}

double round_sigmoid_value(double x, int decimals) {
    // round(sigmoid(x)) is a step at x = 0; evaluating it as a comparison keeps
    // tiny negative arguments from saturating sigmoid to exactly 0.5.
    if (decimals == 0) return x >= 0.0 ? 1.0 : 0.0;
    const double scale = std::pow(10.0, decimals);
    return std::round(sigmoid(x) * scale) / scale;
}

double round_sigmoid_surrogate(double x) {
    // sigma(x) (1 - sigma(x)) without the cancellation in 1 - sigma for large x.
    const double e = std::exp(-std::abs(x));
    return e / ((1.0 + e) * (1.0 + e));
}

tape::Expr softmax(tape::Expr z) {
    const tape::Expr e = tape::exp(z - tape::max(z));
    return e / tape::sum(e);
}

tape::Expr sparsemax(tape::Expr z) { return tape::sparsemax(z); }

tape::Expr project(Kind kind, tape::Expr z) { return kind == Kind::Softmax ? projection::softmax(z) : projection::sparsemax(z); }

tape::Expr mask_above(tape::Expr x, double threshold) {
    return tape::round_sigmoid((x - threshold) - kMaskEpsilon, 0);
}

tape::Expr mask_below(tape::Expr x, double threshold) {
    return tape::round_sigmoid((threshold - x) - kMaskEpsilon, 0);
}

Vector mask_above(std::span<const double> x, double threshold) {
    Vector m(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m[i] = round_sigmoid_value((x[i] - threshold) - kMaskEpsilon, 0);
    return m;
}

Vector mask_below(std::span<const double> x, double threshold) {
    Vector m(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m[i] = round_sigmoid_value((threshold - x[i]) - kMaskEpsilon, 0);
    return m;
}

}  // namespace mpo::projection
