#pragma once

// Portfolio objectives and penalty constraints as tape graph builders.
// Every statistic uses population normalization (divide by T).
//
// R denotes the per-period portfolio return series (length T), built from a
// T x n return matrix and the weight vector via portfolio_returns().

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpo/common.hpp"
#include "mpo/tape.hpp"

namespace mpo::finance {

struct UcitsLimits {
    double single_cap = 0.10;
    double lower = 0.05;
    double upper = 0.40;
};

/// Binary asset-in-group matrix (n x m) plus a target weight per group.
struct GroupMaskSet {
    Matrix membership;
    Vector max_weight;
    std::vector<std::string> names;

    /// Throws InputError unless the shapes agree with n assets and entries are 0/1.
    void validate(std::size_t n_assets) const;
};

tape::Expr portfolio_returns(std::shared_ptr<const Matrix> returns, tape::Expr w);

tape::Expr variance(tape::Expr R);

/// -(mean(R) - risk_aversion * var(R)).
tape::Expr mean_variance_objective(tape::Expr R, double risk_aversion);
tape::Expr sharpe_ratio(tape::Expr R, double risk_free = 0.0);
/// Negated linear-interpolated alpha-quantile of R.
tape::Expr value_at_risk(tape::Expr R, double alpha);
tape::Expr cvar(tape::Expr R, double alpha);
tape::Expr tracking_error(tape::Expr R, tape::Expr benchmark);
tape::Expr volatility(tape::Expr R);

tape::Expr constraint_te(tape::Expr R, tape::Expr benchmark, double te_max);
tape::Expr constraint_ucits_10(tape::Expr w, const UcitsLimits& limits = {});
tape::Expr constraint_ucits_5_40(tape::Expr w, const UcitsLimits& limits = {});
tape::Expr constraint_min_weight(tape::Expr w, double min_weight);
tape::Expr constraint_count_range(tape::Expr w, int low, int high);
tape::Expr constraint_group_mask(tape::Expr w, const GroupMaskSet& groups);

/// Number of strictly active assets as the count-range penalty sees it.
int active_count(std::span<const double> w);
/// Sum of weights strictly above the lower UCITS limit.
double masked_sum_above(std::span<const double> w, double lower);

struct Metrics {
    double sharpe = 0.0;
    std::optional<double> tracking_error;
    double var = 0.0;
    double cvar = 0.0;
    double volatility = 0.0;
};

/// Evaluates every report metric at fixed weights. Sharpe is reported as 0 when
/// the portfolio has zero volatility.
Metrics compute_metrics(const Matrix& returns, const std::optional<Vector>& benchmark, std::span<const double> w,
                        double alpha = 0.05, double risk_free = 0.0);

}  // namespace mpo::finance
