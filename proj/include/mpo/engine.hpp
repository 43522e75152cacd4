#pragma once

// Penalty-weighted multi-objective loss and the gradient-descent training loop.
//
//   loss(z) = sum_k lambda_k * term_k(project(z))
//
// Maximization objectives (Sharpe) enter negated. Constraint terms are the
// nonnegative penalties from finance.hpp.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mpo/common.hpp"
#include "mpo/data.hpp"
#include "mpo/finance.hpp"
#include "mpo/projection.hpp"
#include "mpo/tape.hpp"

namespace mpo::engine {

enum class TermKind {
    MeanVariance,
    Sharpe,
    Cvar,
    Volatility,
    TrackingError,
    Ucits10,
    Ucits540,
    MinWeight,
    CountRange,
    GroupMask,
};

std::string_view to_string(TermKind kind);
/// Throws ConfigError on an unknown name.
TermKind parse_term_kind(std::string_view name);
bool is_objective(TermKind kind);

struct Term {
    TermKind kind = TermKind::Cvar;
    double lambda = 1.0;
    std::string label;  // unique within a spec; defaults to the kind name

    double risk_aversion = 0.0;  // mean-variance
    double risk_free = 0.0;      // sharpe
    double alpha = 0.05;         // cvar
    double te_max = 0.0;         // tracking-error cap
    double min_weight = 0.01;    // min-weight
    int low = 1, high = 1;       // count-range
    finance::UcitsLimits ucits;
    finance::GroupMaskSet groups;

    std::string name() const;
};

struct LossSpec {
    std::vector<Term> objectives;
    std::vector<Term> constraints;

    /// Throws ConfigError: no objective, negative multiplier, duplicate label,
    /// a constraint kind among objectives or vice versa.
    void validate() const;
    std::vector<const Term*> terms() const;
    Term* find(std::string_view label);
    const Term* find(std::string_view label) const;
};

enum class OptimizerKind { GradientDescent, Adam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 500;
    OptimizerKind optimizer = OptimizerKind::Adam;
    projection::Kind projection = projection::Kind::Sparsemax;
    std::uint64_t seed = 0;
    double init_scale = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

struct ComposedLoss {
    tape::Expr weights;
    tape::Expr returns;
    tape::Expr total;
    std::vector<tape::Expr> terms;  // lambda_k * term_k, in LossSpec::terms() order
    std::vector<std::string> labels;
};

/// Builds the loss on an explicit weight expression (no projection).
ComposedLoss compose_loss_on_weights(const LossSpec& spec, const data::ReturnsPanel& panel, tape::Expr w);
/// Builds the loss on pre-weights z, projected onto the simplex by `projection`.
ComposedLoss compose_loss(const LossSpec& spec, const data::ReturnsPanel& panel, tape::Expr z,
                          projection::Kind projection = projection::Kind::Sparsemax);

/// Evaluates the weighted loss and each weighted term at fixed weights.
struct LossValue {
    double total = 0.0;
    std::vector<double> terms;
    double objective = 0.0;  // sum over objective terms only
};
LossValue evaluate_loss(const LossSpec& spec, const data::ReturnsPanel& panel, std::span<const double> w);

struct TrainTrace {
    std::vector<std::string> term_labels;
    std::vector<double> total;               // per epoch, before that epoch's update
    std::vector<std::vector<double>> terms;  // per epoch, weighted term values
    Vector final_preweights;
    Vector final_weights;
    double final_loss = 0.0;  // loss at final_weights
    double final_objective = 0.0;
    bool non_monotonic = false;  // final_loss > initial loss
    finance::Metrics metrics;

    std::size_t epochs() const { return total.size(); }
};

using EpochObserver = std::function<void(int epoch, const Vector& weights)>;

Vector initial_preweights(std::size_t n, const TrainConfig& cfg);

TrainTrace train(const LossSpec& spec, const data::ReturnsPanel& panel, const TrainConfig& cfg,
                 const EpochObserver& observer = {});

// Compliance of final weights against the hard constraints.

struct Tolerances {
    double ucits_cap = 1e-6;
    double ucits_upper = 1e-3;
    double tracking_error = 1e-5;
    double min_weight = 1e-6;
    double group = 1e-3;
};

struct ComplianceRow {
    std::string label;
    TermKind kind = TermKind::Ucits10;
    double residual = 0.0;  // unweighted penalty at the weights
    bool satisfied = true;
};

std::vector<ComplianceRow> check_compliance(const LossSpec& spec, const data::ReturnsPanel& panel,
                                            std::span<const double> w, const Tolerances& tol = {});
bool all_satisfied(const std::vector<ComplianceRow>& rows);

// Multiplier sweep.

using LambdaGrid = std::vector<std::pair<std::string, std::vector<double>>>;

struct GridRow {
    std::vector<double> lambdas;
    std::optional<TrainTrace> trace;
    double objective = 0.0;
    std::vector<ComplianceRow> compliance;
    bool feasible = false;
    std::string error;  // empty on success
};

/// Row-major over the grid (first entry varies slowest). Per-run errors are
/// recorded in their row; the sweep continues.
std::vector<GridRow> grid_search(const LossSpec& spec_template, const LambdaGrid& grid, const data::ReturnsPanel& panel,
                                 const TrainConfig& cfg, const Tolerances& tol = {});

// Replication against the enumeration oracle.

struct ReplicationOptions {
    std::size_t max_assets = 0;  // 0: same as min_assets
    std::size_t min_window = 30;
    double oracle_step = 0.01;
};

struct ReplicationRow {
    std::vector<std::size_t> assets;
    std::size_t first = 0, last = 0;
    Vector gd_weights;
    Vector oracle_weights;
    double gd_objective = 0.0;
    double oracle_objective = 0.0;
    double weight_mse = 0.0;
};

struct ReplicationResult {
    std::vector<ReplicationRow> rows;
    double mean_weight_mse = 0.0;
    double mean_objective_sq_error = 0.0;
};

ReplicationResult replication_study(const data::ReturnsPanel& universe, int replications, std::size_t min_assets,
                                    const LossSpec& spec, const TrainConfig& cfg, const ReplicationOptions& opts = {});

}  // namespace mpo::engine
