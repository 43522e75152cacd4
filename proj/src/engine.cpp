#include "mpo/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mpo/oracle.hpp"

namespace mpo::engine {

namespace {

constexpr std::pair<TermKind, std::string_view> kTermNames[] = {
    {TermKind::MeanVariance, "mean-variance"}, {TermKind::Sharpe, "sharpe"},
    {TermKind::Cvar, "cvar"},                  {TermKind::Volatility, "volatility"},
    {TermKind::TrackingError, "te"},           {TermKind::Ucits10, "ucits10"},
    {TermKind::Ucits540, "ucits540"},          {TermKind::MinWeight, "min-weight"},
    {TermKind::CountRange, "count-range"},     {TermKind::GroupMask, "group-mask"},
};

}  // namespace

std::string_view to_string(TermKind kind) {
    for (const auto& [k, name] : kTermNames)
        if (k == kind) return name;
    return "?";
}

TermKind parse_term_kind(std::string_view name) {
    for (const auto& [k, n] : kTermNames)
        if (n == name) return k;
    throw ConfigError("unknown term kind '" + std::string(name) + "'");
}

bool is_objective(TermKind kind) {
    return kind == TermKind::MeanVariance || kind == TermKind::Sharpe || kind == TermKind::Cvar ||
           kind == TermKind::Volatility;
}

std::string Term::name() const { return label.empty() ? std::string(to_string(kind)) : label; }

void LossSpec::validate() const {
    if (objectives.empty()) throw ConfigError("loss spec needs at least one objective term");
    std::set<std::string> seen;
    for (const Term* t : terms()) {
        const bool objective = std::find_if(objectives.begin(), objectives.end(),
                                            [&](const Term& o) { return &o == t; }) != objectives.end();
        if (objective != is_objective(t->kind))
            throw ConfigError("term '" + t->name() + "' is listed as " + (objective ? "an objective" : "a constraint") +
                              " but is a " + (is_objective(t->kind) ? "objective" : "constraint") + " kind");
        if (!(t->lambda >= 0.0) || !std::isfinite(t->lambda))
            throw ConfigError("term '" + t->name() + "' has a negative or non-finite multiplier");
        if (!seen.insert(t->name()).second) throw ConfigError("duplicate term label '" + t->name() + "'");
        if (t->kind == TermKind::Cvar && !(t->alpha > 0.0 && t->alpha < 1.0))
            throw ConfigError("term '" + t->name() + "': alpha must lie in (0, 1)");
        if (t->kind == TermKind::TrackingError && !(t->te_max >= 0.0))
            throw ConfigError("term '" + t->name() + "': te_max must be nonnegative");
        if (t->kind == TermKind::MinWeight && !(t->min_weight > 0.0 && t->min_weight < 1.0))
            throw ConfigError("term '" + t->name() + "': min_weight must lie in (0, 1)");
        if (t->kind == TermKind::CountRange && !(t->low > 0 && t->low <= t->high))
            throw ConfigError("term '" + t->name() + "': count range needs 0 < low <= high");
    }
}

std::vector<const Term*> LossSpec::terms() const {
    std::vector<const Term*> out;
    for (const auto& t : objectives) out.push_back(&t);
    for (const auto& t : constraints) out.push_back(&t);
    return out;
}

Term* LossSpec::find(std::string_view label) {
    for (auto& t : objectives)
        if (t.name() == label) return &t;
    for (auto& t : constraints)
        if (t.name() == label) return &t;
    return nullptr;
}

const Term* LossSpec::find(std::string_view label) const { return const_cast<LossSpec*>(this)->find(label); }

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "gd"; }

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "gd") return OptimizerKind::GradientDescent;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(init_scale >= 0.0)) throw ConfigError("initialization scale must be nonnegative");
}

namespace {

tape::Expr build_term(const Term& t, tape::Expr w, tape::Expr R, const std::optional<tape::Expr>& bench) {
    switch (t.kind) {
        case TermKind::MeanVariance: return finance::mean_variance_objective(R, t.risk_aversion);
        case TermKind::Sharpe: return -finance::sharpe_ratio(R, t.risk_free);
        case TermKind::Cvar: return finance::cvar(R, t.alpha);
        case TermKind::Volatility: return finance::volatility(R);
        case TermKind::TrackingError:
            if (!bench) throw ConfigError("term '" + t.name() + "' needs a benchmark series");
            return finance::constraint_te(R, *bench, t.te_max);
        case TermKind::Ucits10: return finance::constraint_ucits_10(w, t.ucits);
        case TermKind::Ucits540: return finance::constraint_ucits_5_40(w, t.ucits);
        case TermKind::MinWeight: return finance::constraint_min_weight(w, t.min_weight);
        case TermKind::CountRange: return finance::constraint_count_range(w, t.low, t.high);
        case TermKind::GroupMask: return finance::constraint_group_mask(w, t.groups);
    }
    throw ConfigError("unknown term kind");
}

}  // namespace

ComposedLoss compose_loss_on_weights(const LossSpec& spec, const data::ReturnsPanel& panel, tape::Expr w) {
    spec.validate();
    if (w.size() != panel.asset_count())
        throw InputError("panel has " + std::to_string(panel.asset_count()) + " assets but weights have " +
                         std::to_string(w.size()));
    tape::Graph& g = w.graph();
    ComposedLoss out;
    out.weights = w;
    out.returns = finance::portfolio_returns(std::make_shared<const Matrix>(panel.returns), w);
    std::optional<tape::Expr> bench;
    if (panel.benchmark) bench = g.constant(*panel.benchmark);

    for (const Term* t : spec.terms()) {
        tape::Expr term = build_term(*t, w, out.returns, bench) * t->lambda;
        g.set_label(term, t->name());
        out.terms.push_back(term);
        out.labels.push_back(t->name());
    }
    out.total = out.terms.front();
    for (std::size_t k = 1; k < out.terms.size(); ++k) out.total = out.total + out.terms[k];
    g.set_label(out.total, "loss");
    return out;
}

ComposedLoss compose_loss(const LossSpec& spec, const data::ReturnsPanel& panel, tape::Expr z,
                          projection::Kind projection) {
    return compose_loss_on_weights(spec, panel, projection::project(projection, z));
}

LossValue evaluate_loss(const LossSpec& spec, const data::ReturnsPanel& panel, std::span<const double> w) {
    tape::Graph g;
    const tape::Expr wv = g.input(w.size(), "w");
    const ComposedLoss loss = compose_loss_on_weights(spec, panel, wv);
    g.bind(wv, w);
    LossValue v;
    v.total = g.forward(loss.total)[0];
    for (std::size_t k = 0; k < loss.terms.size(); ++k) {
        v.terms.push_back(g.value(loss.terms[k])[0]);
        if (k < spec.objectives.size()) v.objective += v.terms.back();
    }
    return v;
}

Vector initial_preweights(std::size_t n, const TrainConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    Vector z(n);
    for (auto& v : z) v = u(rng) * cfg.init_scale;
    return z;
}

namespace {

std::string term_breakdown(const std::vector<std::string>& labels, const std::vector<double>& values) {
    std::string s;
    for (std::size_t k = 0; k < labels.size() && k < values.size(); ++k) {
        if (!s.empty()) s += ", ";
        s += labels[k] + "=" + format_number(values[k]);
    }
    return s;
}

double alpha_for_metrics(const LossSpec& spec) {
    for (const Term* t : spec.terms())
        if (t->kind == TermKind::Cvar) return t->alpha;
    return 0.05;
}

double risk_free_for_metrics(const LossSpec& spec) {
    for (const Term* t : spec.terms())
        if (t->kind == TermKind::Sharpe) return t->risk_free;
    return 0.0;
}

}  // namespace

TrainTrace train(const LossSpec& spec, const data::ReturnsPanel& panel, const TrainConfig& cfg,
                 const EpochObserver& observer) {
    cfg.validate();
    spec.validate();
    const std::size_t n = panel.asset_count();
    if (n < 2) throw InputError("training needs at least 2 assets");
    if (panel.periods() < 2) throw InputError("training needs at least 2 periods");

    tape::Graph g;
    const tape::Expr z = g.input(n, "z");
    const ComposedLoss loss = compose_loss(spec, panel, z, cfg.projection);

    TrainTrace trace;
    trace.term_labels = loss.labels;
    trace.total.reserve(static_cast<std::size_t>(cfg.epochs));
    trace.terms.reserve(static_cast<std::size_t>(cfg.epochs));

    Vector params = initial_preweights(n, cfg);
    Vector m(n, 0.0), v(n, 0.0);
    double beta1_pow = 1.0, beta2_pow = 1.0;

    auto evaluate = [&](int epoch, std::vector<double>& terms) {
        g.bind(z, params);
        double total = 0.0;
        try {
            total = g.forward(loss.total)[0];
        } catch (const EvaluationError& e) {
            terms.clear();
            for (const auto& t : loss.terms) {
                const auto& val = g.value(t);
                terms.push_back(val.empty() ? std::nan("") : val[0]);
            }
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " [" +
                                term_breakdown(loss.labels, terms) + "]: " + e.what());
        }
        terms.clear();
        for (const auto& t : loss.terms) terms.push_back(g.value(t)[0]);
        return total;
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<double> terms;
        const double total = evaluate(epoch, terms);
        if (observer) observer(epoch, g.value(loss.weights));
        trace.total.push_back(total);
        trace.terms.push_back(std::move(terms));

        g.backward(loss.total);
        const Vector& grad = g.gradient(z);
        if (cfg.optimizer == OptimizerKind::GradientDescent) {
            for (std::size_t i = 0; i < n; ++i) params[i] -= cfg.learning_rate * grad[i];
        } else {
            beta1_pow *= cfg.beta1;
            beta2_pow *= cfg.beta2;
            for (std::size_t i = 0; i < n; ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                const double mhat = m[i] / (1.0 - beta1_pow);
                const double vhat = v[i] / (1.0 - beta2_pow);
                params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
            }
        }
    }

    std::vector<double> final_terms;
    trace.final_loss = evaluate(cfg.epochs, final_terms);
    trace.final_preweights = params;
    trace.final_weights = g.value(loss.weights);
    trace.final_objective = 0.0;
    for (std::size_t k = 0; k < spec.objectives.size(); ++k) trace.final_objective += final_terms[k];
    trace.non_monotonic = trace.final_loss > trace.total.front();
    trace.metrics = finance::compute_metrics(panel.returns, panel.benchmark, trace.final_weights,
                                             alpha_for_metrics(spec), risk_free_for_metrics(spec));
    return trace;
}

std::vector<ComplianceRow> check_compliance(const LossSpec& spec, const data::ReturnsPanel& panel,
                                            std::span<const double> w, const Tolerances& tol) {
    std::vector<ComplianceRow> rows;
    if (spec.constraints.empty()) return rows;

    tape::Graph g;
    const tape::Expr wv = g.constant(Vector(w.begin(), w.end()));
    const tape::Expr R = finance::portfolio_returns(std::make_shared<const Matrix>(panel.returns), wv);
    std::optional<tape::Expr> bench;
    if (panel.benchmark) bench = g.constant(*panel.benchmark);

    for (const Term& t : spec.constraints) {
        ComplianceRow row;
        row.label = t.name();
        row.kind = t.kind;
        row.residual = g.forward(build_term(t, wv, R, bench))[0];
        switch (t.kind) {
            case TermKind::Ucits10:
                row.satisfied = std::all_of(w.begin(), w.end(), [&](double x) { return x <= t.ucits.single_cap + tol.ucits_cap; });
                break;
            case TermKind::Ucits540:
                row.satisfied = finance::masked_sum_above(w, t.ucits.lower) <= t.ucits.upper + tol.ucits_upper;
                break;
            case TermKind::TrackingError:
                row.satisfied = g.forward(finance::tracking_error(R, *bench))[0] <= t.te_max + tol.tracking_error;
                break;
            case TermKind::MinWeight: {
                const Vector active = projection::mask_above(w, 0.0);
                row.satisfied = true;
                for (std::size_t i = 0; i < w.size(); ++i)
                    if (active[i] > 0.0 && w[i] < t.min_weight - tol.min_weight) row.satisfied = false;
                break;
            }
            case TermKind::CountRange: {
                const int k = finance::active_count(w);
                row.satisfied = k >= t.low && k <= t.high;
                break;
            }
            case TermKind::GroupMask: {
                row.satisfied = true;
                for (std::size_t j = 0; j < t.groups.max_weight.size(); ++j) {
                    double achieved = 0.0;
                    for (std::size_t i = 0; i < w.size(); ++i) achieved += w[i] * t.groups.membership(i, j);
                    if (std::abs(t.groups.max_weight[j] - achieved) > tol.group) row.satisfied = false;
                }
                break;
            }
            default:
                break;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

bool all_satisfied(const std::vector<ComplianceRow>& rows) {
    return std::all_of(rows.begin(), rows.end(), [](const ComplianceRow& r) { return r.satisfied; });
}

std::vector<GridRow> grid_search(const LossSpec& spec_template, const LambdaGrid& grid, const data::ReturnsPanel& panel,
                                 const TrainConfig& cfg, const Tolerances& tol) {
    if (grid.empty()) throw ConfigError("grid search needs at least one axis");
    for (const auto& [label, values] : grid) {
        if (values.empty()) throw ConfigError("grid axis '" + label + "' is empty");
        if (!spec_template.find(label)) throw ConfigError("grid axis '" + label + "' matches no term");
    }

    std::size_t combos = 1;
    for (const auto& axis : grid) combos *= axis.second.size();

    std::vector<GridRow> rows;
    rows.reserve(combos);
    for (std::size_t flat = 0; flat < combos; ++flat) {
        GridRow row;
        LossSpec spec = spec_template;
        std::size_t rem = flat;
        row.lambdas.resize(grid.size());
        for (std::size_t a = grid.size(); a-- > 0;) {
            const auto& values = grid[a].second;
            row.lambdas[a] = values[rem % values.size()];
            rem /= values.size();
        }
        for (std::size_t a = 0; a < grid.size(); ++a) spec.find(grid[a].first)->lambda = row.lambdas[a];
        try {
            TrainTrace trace = train(spec, panel, cfg);
            row.objective = trace.final_objective;
            row.compliance = check_compliance(spec, panel, trace.final_weights, tol);
            row.feasible = all_satisfied(row.compliance);
            row.trace = std::move(trace);
        } catch (const Error& e) {
            row.error = e.what();
            row.feasible = false;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ReplicationResult replication_study(const data::ReturnsPanel& universe, int replications, std::size_t min_assets,
                                    const LossSpec& spec, const TrainConfig& cfg, const ReplicationOptions& opts) {
    if (replications < 1) throw ConfigError("replications must be at least 1");
    const std::size_t max_assets = opts.max_assets == 0 ? min_assets : opts.max_assets;
    if (min_assets < 2 || max_assets < min_assets) throw ConfigError("invalid asset-count range for replication");
    if (universe.asset_count() < max_assets)
        throw ConfigError("universe has " + std::to_string(universe.asset_count()) + " assets, need " +
                          std::to_string(max_assets));
    const std::size_t T = universe.periods();
    const std::size_t min_window = std::min(std::max<std::size_t>(opts.min_window, 2), T);

    std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
    ReplicationResult result;
    for (int k = 0; k < replications; ++k) {
        ReplicationRow row;
        const std::size_t d = std::uniform_int_distribution<std::size_t>(min_assets, max_assets)(rng);
        std::vector<std::size_t> idx(universe.asset_count());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < d; ++i) {
            const std::size_t j = std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng);
            std::swap(idx[i], idx[j]);
        }
        row.assets.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(d));
        std::sort(row.assets.begin(), row.assets.end());
        const std::size_t len = std::uniform_int_distribution<std::size_t>(min_window, T)(rng);
        row.first = std::uniform_int_distribution<std::size_t>(0, T - len)(rng);
        row.last = row.first + len;

        const data::ReturnsPanel sub = universe.select(row.assets, row.first, row.last);
        TrainConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(k);
        const TrainTrace trace = train(spec, sub, run_cfg);
        row.gd_weights = trace.final_weights;

        const auto best = oracle::simplex_grid_search(
            [&](std::span<const double> w) { return oracle::direct_loss(spec, sub, w); }, d, opts.oracle_step);
        row.oracle_weights = best.weights;
        row.oracle_objective = best.value;
        row.gd_objective = oracle::direct_loss(spec, sub, row.gd_weights);

        double se = 0.0;
        for (std::size_t i = 0; i < d; ++i) se += (row.gd_weights[i] - row.oracle_weights[i]) *
                                                 (row.gd_weights[i] - row.oracle_weights[i]);
        row.weight_mse = se / static_cast<double>(d);
        result.mean_weight_mse += row.weight_mse;
        const double gap = row.gd_objective - row.oracle_objective;
        result.mean_objective_sq_error += gap * gap;
        result.rows.push_back(std::move(row));
    }
    result.mean_weight_mse /= replications;
    result.mean_objective_sq_error /= replications;
    return result;
}

}  // namespace mpo::engine
