#include "mpo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpo::oracle {

std::uint64_t composition_count(std::size_t n, std::size_t units) {
    // C(units + n - 1, n - 1) computed incrementally; each partial product is itself a binomial.
    if (n == 0) return 0;
    const std::uint64_t k = n - 1;
    std::uint64_t c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        const std::uint64_t num = units + i;
        if (c > std::numeric_limits<std::uint64_t>::max() / num) return std::numeric_limits<std::uint64_t>::max();
        c = c * num / i;
    }
    return c;
}

GridResult simplex_grid_search(const std::function<double(std::span<const double>)>& objective, std::size_t n,
                               double step, std::uint64_t limit) {
    if (n == 0) throw ConfigError("grid search needs at least one asset");
    if (!(step > 0.0 && step <= 1.0)) throw ConfigError("grid step must lie in (0, 1]");
    const double ratio = 1.0 / step;
    const auto units = static_cast<std::size_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(units)) > 1e-9 * ratio)
        throw ConfigError("grid step must divide 1 evenly");
    const std::uint64_t count = composition_count(n, units);
    if (count > limit)
        throw ConfigError("simplex grid has " + std::to_string(count) + " points, limit is " + std::to_string(limit));

    GridResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> parts(n, 0);
    Vector w(n, 0.0);
    const double denom = static_cast<double>(units);

    // Iterative enumeration of compositions in lexicographically descending order.
    parts[0] = units;
    while (true) {
        for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(parts[i]) / denom;
        const double v = objective(w);
        ++best.evaluated;
        if (v < best.value) {
            best.value = v;
            best.weights = w;
        }
        // Next composition: find the rightmost nonzero part before the last slot,
        // move one unit right and gather the tail into the slot after it.
        std::size_t i = n - 1;
        while (i-- > 0)
            if (parts[i] > 0) break;
        if (i == static_cast<std::size_t>(-1) || n == 1) break;
        const std::size_t tail = parts[n - 1];
        parts[n - 1] = 0;
        --parts[i];
        parts[i + 1] = tail + 1;
    }
    if (best.weights.empty()) throw EvaluationError("grid search objective returned no finite value");
    return best;
}

Vector euclidean_simplex_projection(std::span<const double> z) {
    const std::size_t n = z.size();
    Vector asc(z.begin(), z.end());
    std::sort(asc.begin(), asc.end());
    // Scan thresholds from the largest support downwards: with the i smallest
    // entries dropped, theta = (sum of the rest - 1) / (n - i). The right support
    // is the first i for which theta lies in [asc[i-1], asc[i]).
    double rest = 0.0;
    for (double v : asc) rest += v;
    double theta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        theta = (rest - 1.0) / static_cast<double>(n - i);
        if (theta < asc[i]) break;
        rest -= asc[i];
    }
    Vector w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = z[i] > theta ? z[i] - theta : 0.0;
    return w;
}

double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

double quantile(std::span<const double> x, double q) {
    Vector s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double rank = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (rank - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double cvar(std::span<const double> R, double alpha) {
    const double var = -quantile(R, alpha);
    double shortfall = 0.0;
    for (double r : R) shortfall += std::max(-r - var, 0.0);
    return var + shortfall / static_cast<double>(R.size()) / alpha;
}

namespace {

double step01(double x) { return x >= 0.0 ? 1.0 : 0.0; }

double direct_term(const engine::Term& t, const data::ReturnsPanel& panel, std::span<const double> w,
                   const Vector& R) {
    using engine::TermKind;
    const double eps = 1e-16;
    switch (t.kind) {
        case TermKind::MeanVariance: {
            const double s = stddev(R);
            return -(mean(R) - t.risk_aversion * s * s);
        }
        case TermKind::Sharpe: return -(mean(R) - t.risk_free) / stddev(R);
        case TermKind::Cvar: return cvar(R, t.alpha);
        case TermKind::Volatility: return stddev(R);
        case TermKind::TrackingError: {
            if (!panel.benchmark) throw ConfigError("tracking error needs a benchmark series");
            Vector d(R.size());
            for (std::size_t i = 0; i < R.size(); ++i) d[i] = R[i] - (*panel.benchmark)[i];
            return std::max(stddev(d) - t.te_max, 0.0);
        }
        case TermKind::Ucits10: {
            double s = 0.0;
            for (double x : w) s += std::max(x - t.ucits.single_cap, 0.0);
            return s;
        }
        case TermKind::Ucits540: {
            double s = 0.0;
            for (double x : w) s += x * step01((x - t.ucits.lower) - eps);
            return std::max(s - t.ucits.upper, 0.0);
        }
        case TermKind::MinWeight: {
            double s = 0.0;
            for (double x : w) s += x * step01((t.min_weight - x) - eps);
            return s;
        }
        case TermKind::CountRange: {
            double k = 0.0;
            for (double x : w) k += step01(x - eps);
            return std::max((t.low - k) * (t.high - k), 0.0);
        }
        case TermKind::GroupMask: {
            double s = 0.0;
            for (std::size_t j = 0; j < t.groups.max_weight.size(); ++j) {
                double achieved = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) achieved += w[i] * t.groups.membership(i, j);
                s += std::abs(t.groups.max_weight[j] - achieved);
            }
            return s;
        }
    }
    throw ConfigError("unknown term kind");
}

Vector portfolio_series(const data::ReturnsPanel& panel, std::span<const double> w) {
    if (w.size() != panel.asset_count()) throw InputError("weight vector does not match the panel");
    Vector R(panel.periods(), 0.0);
    for (std::size_t t = 0; t < panel.periods(); ++t) {
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * panel.returns(t, i);
        R[t] = s;
    }
    return R;
}

}  // namespace

double direct_loss(const engine::LossSpec& spec, const data::ReturnsPanel& panel, std::span<const double> w) {
    const Vector R = portfolio_series(panel, w);
    double total = 0.0;
    for (const engine::Term* t : spec.terms()) total += t->lambda * direct_term(*t, panel, w, R);
    return total;
}

double direct_objective(const engine::LossSpec& spec, const data::ReturnsPanel& panel, std::span<const double> w) {
    const Vector R = portfolio_series(panel, w);
    double total = 0.0;
    for (const auto& t : spec.objectives) total += t.lambda * direct_term(t, panel, w, R);
    return total;
}

}  // namespace mpo::oracle
