#include "mpo/finance.hpp"

#include <cmath>

#include "mpo/projection.hpp"

namespace mpo::finance {

using tape::Expr;

namespace {

void require_series(Expr R, const char* what) {
    if (R.size() < 2) throw InputError(std::string(what) + " needs at least 2 periods");
}

void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
}

}  // namespace

void GroupMaskSet::validate(std::size_t n_assets) const {
    if (membership.rows != n_assets)
        throw InputError("group mask has " + std::to_string(membership.rows) + " rows, expected " +
                         std::to_string(n_assets));
    if (membership.cols != max_weight.size())
        throw InputError("group mask has " + std::to_string(membership.cols) + " groups but " +
                         std::to_string(max_weight.size()) + " targets");
    for (double v : membership.data)
        if (v != 0.0 && v != 1.0) throw InputError("group mask entries must be 0 or 1");
}

Expr portfolio_returns(std::shared_ptr<const Matrix> returns, Expr w) { return tape::matvec(std::move(returns), w); }

Expr variance(Expr R) {
    const Expr d = R - tape::mean(R);
    return tape::mean(d * d);
}

Expr mean_variance_objective(Expr R, double risk_aversion) {
    require_series(R, "mean-variance objective");
    return -(tape::mean(R) - risk_aversion * variance(R));
}

Expr sharpe_ratio(Expr R, double risk_free) {
    require_series(R, "sharpe ratio");
    Expr ratio = (tape::mean(R) - risk_free) / tape::stddev(R);
    R.graph().set_label(ratio, "sharpe ratio: degenerate portfolio volatility");
    return ratio;
}

Expr value_at_risk(Expr R, double alpha) {
    require_series(R, "value at risk");
    require_alpha(alpha);
    return -tape::percentile(R, alpha * 100.0);
}

Expr cvar(Expr R, double alpha) {
    const Expr var = value_at_risk(R, alpha);
    const Expr shortfall = tape::relu(-R - var);
    return var + tape::mean(shortfall) / alpha;
}

Expr tracking_error(Expr R, Expr benchmark) {
    if (R.size() != benchmark.size())
        throw InputError("tracking error: portfolio has " + std::to_string(R.size()) + " periods, benchmark has " +
                         std::to_string(benchmark.size()));
    require_series(R, "tracking error");
    return tape::stddev(R - benchmark);
}

Expr volatility(Expr R) {
    require_series(R, "volatility");
    return tape::stddev(R);
}

Expr constraint_te(Expr R, Expr benchmark, double te_max) {
    if (!(te_max >= 0.0)) throw InputError("TE_max must be nonnegative");
    return tape::relu(tracking_error(R, benchmark) - te_max);
}

Expr constraint_ucits_10(Expr w, const UcitsLimits& limits) { return tape::sum(tape::relu(w - limits.single_cap)); }

Expr constraint_ucits_5_40(Expr w, const UcitsLimits& limits) {
    const Expr selected = w * projection::mask_above(w, limits.lower);
    return tape::relu(tape::sum(selected) - limits.upper);
}

Expr constraint_min_weight(Expr w, double min_weight) {
    if (!(min_weight > 0.0 && min_weight < 1.0)) throw InputError("minimum weight must lie in (0, 1)");
    return tape::sum(w * projection::mask_below(w, min_weight));
}

Expr constraint_count_range(Expr w, int low, int high) {
    if (!(low > 0 && low <= high && static_cast<std::size_t>(high) <= w.size()))
        throw InputError("count range requires 0 < low <= high <= n");
    const Expr k = tape::sum(projection::mask_above(w, 0.0));
    return tape::relu((static_cast<double>(low) - k) * (static_cast<double>(high) - k));
}

Expr constraint_group_mask(Expr w, const GroupMaskSet& groups) {
    groups.validate(w.size());
    auto by_group = std::make_shared<const Matrix>(groups.membership.transposed());
    const Expr achieved = tape::matvec(std::move(by_group), w);
    return tape::sum(tape::abs(w.graph().constant(groups.max_weight) - achieved));
}

int active_count(std::span<const double> w) {
    int k = 0;
    for (double m : projection::mask_above(w, 0.0)) k += static_cast<int>(m);
    return k;
}

double masked_sum_above(std::span<const double> w, double lower) {
    const Vector m = projection::mask_above(w, lower);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * m[i];
    return s;
}

Metrics compute_metrics(const Matrix& returns, const std::optional<Vector>& benchmark, std::span<const double> w,
                        double alpha, double risk_free) {
    tape::Graph g;
    const Expr wv = g.constant(Vector(w.begin(), w.end()));
    const Expr R = portfolio_returns(std::make_shared<const Matrix>(returns), wv);

    Metrics m;
    const Expr vol = volatility(R);
    m.volatility = g.forward(vol)[0];
    if (m.volatility > 0.0) m.sharpe = g.forward(sharpe_ratio(R, risk_free))[0];
    m.var = g.forward(value_at_risk(R, alpha))[0];
    m.cvar = g.forward(cvar(R, alpha))[0];
    if (benchmark) m.tracking_error = g.forward(tracking_error(R, g.constant(*benchmark)))[0];
    return m;
}

}  // namespace mpo::finance
