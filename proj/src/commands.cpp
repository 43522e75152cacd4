#include "mpo/commands.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "mpo/data.hpp"

namespace mpo::cli {

namespace fs = std::filesystem;

namespace {

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

std::string csv_cell(std::string s) {
    s = one_line(std::move(s));
    std::replace(s.begin(), s.end(), ',', ';');
    return s;
}

const char* flag(bool b) { return b ? "true" : "false"; }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

double metric_alpha(const engine::LossSpec& spec) {
    for (const auto* t : spec.terms())
        if (t->kind == engine::TermKind::Cvar) return t->alpha;
    return 0.05;
}

double metric_risk_free(const engine::LossSpec& spec) {
    for (const auto* t : spec.terms())
        if (t->kind == engine::TermKind::Sharpe) return t->risk_free;
    return 0.0;
}

}  // namespace

std::pair<int, std::string> describe_error(const std::exception& e) {
    const std::string msg = one_line(e.what());
    if (dynamic_cast<const ConfigError*>(&e)) return {kConfig, "error[config]: " + msg};
    if (dynamic_cast<const IngestionError*>(&e)) return {kIngestion, "error[ingestion]: " + msg};
    if (dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const EvaluationError*>(&e))
        return {kTraining, "error[training]: " + msg};
    if (dynamic_cast<const InputError*>(&e)) return {kConfig, "error[input]: " + msg};
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return {kIo, "error[io]: " + msg};
    return {kIo, "error[internal]: " + msg};
}

void apply_overrides(Scenario& scenario, const Overrides& o) {
    if (o.seed) scenario.train.seed = *o.seed;
    if (o.out_dir) scenario.output_dir = *o.out_dir;
    if (o.projection) scenario.train.projection = *o.projection;
    if (o.optimizer) scenario.train.optimizer = *o.optimizer;
}

std::string render_weights_csv(const std::vector<std::pair<std::string, double>>& weights) {
    std::string s = "asset,weight\n";
    for (const auto& [name, w] : weights) s += name + "," + format_number(w) + "\n";
    return s;
}

std::string render_metrics(const RunReport& r) {
    std::string s;
    auto kv = [&](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
    kv("sharpe", format_number(r.metrics.sharpe));
    if (r.metrics.tracking_error) kv("tracking_error", format_number(*r.metrics.tracking_error));
    kv("var", format_number(r.metrics.var));
    kv("cvar", format_number(r.metrics.cvar));
    kv("volatility", format_number(r.metrics.volatility));
    kv("active_assets", std::to_string(r.weights.size()));
    kv("epochs", std::to_string(r.trace.epochs()));
    kv("final_loss", format_number(r.trace.final_loss));
    kv("final_objective", format_number(r.trace.final_objective));
    kv("non_monotonic", flag(r.trace.non_monotonic));
    for (const auto& c : r.compliance) {
        kv("constraint." + c.label + ".residual", format_number(c.residual));
        kv("constraint." + c.label + ".satisfied", flag(c.satisfied));
    }
    kv("compliant", flag(r.compliant));
    return s;
}

std::string render_trace_csv(const engine::TrainTrace& trace) {
    std::string s = "epoch,total";
    for (const auto& l : trace.term_labels) s += "," + l;
    s += "\n";
    for (std::size_t e = 0; e < trace.total.size(); ++e) {
        s += std::to_string(e) + "," + format_number(trace.total[e]);
        for (double v : trace.terms[e]) s += "," + format_number(v);
        s += "\n";
    }
    return s;
}

std::string render_cumulative_csv(const RunReport& r) {
    std::string s = r.benchmark_cumulative ? "date,portfolio,benchmark\n" : "date,portfolio\n";
    for (std::size_t t = 0; t < r.dates.size(); ++t) {
        s += r.dates[t] + "," + format_number(r.portfolio_cumulative[t]);
        if (r.benchmark_cumulative) s += "," + format_number((*r.benchmark_cumulative)[t]);
        s += "\n";
    }
    return s;
}

Vector read_weights_csv(const fs::path& path, const std::vector<std::string>& assets) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "asset,weight")
        throw IngestionError(path.string() + ": expected header 'asset,weight'");
    Vector w(assets.size(), 0.0);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IngestionError(path.string() + ": malformed row " + std::to_string(row));
        const std::string name = line.substr(0, comma);
        const auto it = std::find(assets.begin(), assets.end(), name);
        if (it == assets.end()) throw IngestionError(path.string() + ": unknown asset '" + name + "'");
        double v = 0.0;
        const char* first = line.data() + comma + 1;
        const char* last = line.data() + line.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc() || res.ptr != last)
            throw IngestionError(path.string() + ": invalid weight on row " + std::to_string(row));
        w[static_cast<std::size_t>(it - assets.begin())] = v;
    }
    return w;
}

RunReport run_scenario(const Scenario& scenario, const data::ReturnsPanel& panel) {
    const engine::LossSpec spec = resolve_loss(scenario, panel);
    RunReport r;
    r.trace = engine::train(spec, panel, scenario.train);
    const Vector& w = r.trace.final_weights;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] != 0.0) r.weights.emplace_back(panel.assets[i], w[i]);
    r.metrics = finance::compute_metrics(panel.returns, panel.benchmark, w, metric_alpha(spec), metric_risk_free(spec));
    r.compliance = engine::check_compliance(spec, panel, w);
    r.compliant = engine::all_satisfied(r.compliance);

    r.dates = panel.dates;
    Vector R(panel.periods(), 0.0);
    for (std::size_t t = 0; t < panel.periods(); ++t)
        for (std::size_t i = 0; i < w.size(); ++i) R[t] += w[i] * panel.returns(t, i);
    r.portfolio_cumulative = data::cumulative_returns(R);
    if (panel.benchmark) r.benchmark_cumulative = data::cumulative_returns(*panel.benchmark);
    return r;
}

int cmd_run(const fs::path& scenario_path, const Overrides& o, std::ostream& out) {
    Scenario s = load_scenario(scenario_path);
    apply_overrides(s, o);
    const data::ReturnsPanel panel = load_data(s);
    const RunReport r = run_scenario(s, panel);

    ensure_dir(s.output_dir);
    data::write_text_atomic(s.output_dir / "weights.csv", render_weights_csv(r.weights));
    data::write_text_atomic(s.output_dir / "metrics.txt", render_metrics(r));
    data::write_text_atomic(s.output_dir / "trace.csv", render_trace_csv(r.trace));
    data::write_text_atomic(s.output_dir / "cumulative_returns.csv", render_cumulative_csv(r));

    out << s.name << ": " << r.weights.size() << " active assets, loss " << format_number(r.trace.final_loss)
        << (r.compliant ? ", compliant" : ", NOT compliant") << " -> " << s.output_dir.string() << "\n";
    for (const auto& c : r.compliance)
        if (!c.satisfied) out << "  violated: " << c.label << " (residual " << format_number(c.residual) << ")\n";
    return r.compliant ? kCompliant : kNonCompliant;
}

int cmd_sweep(const fs::path& scenario_path, const fs::path& grid_path, const Overrides& o, std::ostream& out) {
    Scenario s = load_scenario(scenario_path);
    apply_overrides(s, o);
    const engine::LambdaGrid grid = load_grid(grid_path);
    const data::ReturnsPanel panel = load_data(s);
    const engine::LossSpec spec = resolve_loss(s, panel);
    const auto rows = engine::grid_search(spec, grid, panel, s.train);

    std::string csv;
    for (const auto& [label, _] : grid) csv += "lambda_" + label + ",";
    csv += "objective";
    for (const auto& c : spec.constraints) csv += ",residual_" + c.name();
    csv += ",feasible,error\n";
    std::size_t feasible = 0;
    for (const auto& row : rows) {
        for (double l : row.lambdas) csv += format_number(l) + ",";
        csv += row.error.empty() ? format_number(row.objective) : "";
        for (std::size_t c = 0; c < spec.constraints.size(); ++c)
            csv += "," + (c < row.compliance.size() ? format_number(row.compliance[c].residual) : std::string());
        csv += std::string(",") + flag(row.feasible) + "," + csv_cell(row.error) + "\n";
        feasible += row.feasible ? 1 : 0;
    }
    ensure_dir(s.output_dir);
    data::write_text_atomic(s.output_dir / "sweep.csv", csv);
    out << s.name << ": " << rows.size() << " grid rows, " << feasible << " feasible -> "
        << (s.output_dir / "sweep.csv").string() << "\n";
    return kCompliant;
}

int cmd_replicate(const fs::path& scenario_path, int k, std::size_t min_assets, std::size_t max_assets, double step,
                  const Overrides& o, std::ostream& out) {
    Scenario s = load_scenario(scenario_path);
    apply_overrides(s, o);
    if (!s.groups.empty()) throw ConfigError("replication does not support group-mask terms");
    const data::ReturnsPanel panel = load_data(s);
    const engine::LossSpec spec = resolve_loss(s, panel);
    engine::ReplicationOptions opts;
    opts.max_assets = max_assets;
    opts.oracle_step = step;
    const auto result = engine::replication_study(panel, k, min_assets, spec, s.train, opts);

    std::string csv = "replication,assets,first_date,last_date,weight_mse,gd_objective,oracle_objective,objective_gap\n";
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& row = result.rows[i];
        std::string names;
        for (std::size_t a : row.assets) names += (names.empty() ? "" : ";") + panel.assets[a];
        csv += std::to_string(i) + "," + names + "," + panel.dates[row.first] + "," + panel.dates[row.last - 1] + "," +
               format_number(row.weight_mse) + "," + format_number(row.gd_objective) + "," +
               format_number(row.oracle_objective) + "," + format_number(row.gd_objective - row.oracle_objective) +
               "\n";
    }
    std::string summary;
    summary += "replications=" + std::to_string(result.rows.size()) + "\n";
    summary += "oracle_step=" + format_number(step) + "\n";
    summary += "mean_weight_mse=" + format_number(result.mean_weight_mse) + "\n";
    summary += "mean_objective_sq_error=" + format_number(result.mean_objective_sq_error) + "\n";

    ensure_dir(s.output_dir);
    data::write_text_atomic(s.output_dir / "replication.csv", csv);
    data::write_text_atomic(s.output_dir / "replication_summary.txt", summary);
    out << s.name << ": " << result.rows.size() << " replications, mean weight MSE "
        << format_number(result.mean_weight_mse) << " -> " << s.output_dir.string() << "\n";
    return kCompliant;
}

int cmd_synth(const fs::path& spec_path, const fs::path& out_path, bool prices, std::ostream& out) {
    std::ifstream in(spec_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + spec_path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(spec_path.string() + ": invalid JSON (byte " + std::to_string(e.byte) + ")");
    }
    const data::ReturnsPanel panel = data::synthesize(parse_market_spec(doc));
    if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
    data::write_wide_csv(prices ? data::to_prices(panel) : data::to_table(panel), out_path);
    out << "wrote " << panel.asset_count() << " assets x " << panel.periods() << " periods ("
        << (prices ? "prices" : "returns") << ") -> " << out_path.string() << "\n";
    return kCompliant;
}

}  // namespace mpo::cli
