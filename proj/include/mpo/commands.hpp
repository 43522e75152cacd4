#pragma once

// The four CLI commands. Each writes its files atomically and returns a process
// exit code; errors are mapped by exit_code_for().

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mpo/engine.hpp"
#include "mpo/finance.hpp"
#include "mpo/scenario.hpp"

namespace mpo::cli {

enum ExitCode : int {
    kCompliant = 0,
    kNonCompliant = 1,
    kUsage = 2,
    kConfig = 3,
    kIngestion = 4,
    kTraining = 5,
    kIo = 6,
};

/// Maps the error taxonomy onto exit codes and a one-line "error[<kind>]: ..." message.
std::pair<int, std::string> describe_error(const std::exception& e);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
    std::optional<projection::Kind> projection;
    std::optional<engine::OptimizerKind> optimizer;
};

void apply_overrides(Scenario& scenario, const Overrides& o);

struct RunReport {
    std::vector<std::pair<std::string, double>> weights;  // nonzero weights, panel order
    finance::Metrics metrics;
    std::vector<engine::ComplianceRow> compliance;
    std::vector<std::string> dates;
    Vector portfolio_cumulative;
    std::optional<Vector> benchmark_cumulative;
    engine::TrainTrace trace;
    bool compliant = true;
};

// File renderers (exposed for consistency tests).
std::string render_weights_csv(const std::vector<std::pair<std::string, double>>& weights);
std::string render_metrics(const RunReport& report);
std::string render_trace_csv(const engine::TrainTrace& trace);
std::string render_cumulative_csv(const RunReport& report);

/// Reads weights.csv back into a full weight vector in panel order (missing assets are 0).
Vector read_weights_csv(const std::filesystem::path& path, const std::vector<std::string>& assets);

RunReport run_scenario(const Scenario& scenario, const data::ReturnsPanel& panel);

int cmd_run(const std::filesystem::path& scenario_path, const Overrides& o, std::ostream& out);
int cmd_sweep(const std::filesystem::path& scenario_path, const std::filesystem::path& grid_path,
              const Overrides& o, std::ostream& out);
int cmd_replicate(const std::filesystem::path& scenario_path, int k, std::size_t min_assets,
                  std::size_t max_assets, double step, const Overrides& o, std::ostream& out);
int cmd_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_path, bool prices,
              std::ostream& out);

}  // namespace mpo::cli
