#pragma once

// Declarative scenario files (JSON). Example:
//
// {
//   "schema": 1,
//   "name": "case3_min_cvar_ucits",
//   "data": {"path": "data/market_prices.csv", "mode": "prices", "benchmark": "benchmark"},
//   "projection": "sparsemax",
//   "train": {"optimizer": "adam", "learning_rate": 0.001, "epochs": 2000, "seed": 7},
//   "objectives": [{"kind": "cvar", "lambda": 1.0, "alpha": 0.05}],
//   "constraints": [{"kind": "ucits10", "lambda": 1.0}, {"kind": "ucits540", "lambda": 1.0}],
//   "output_dir": "out/case3"
// }
//
// Relative paths resolve against the scenario file's directory. "data" may
// instead hold {"synthetic": {...}} with the fields accepted by parse_market_spec.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mpo/data.hpp"
#include "mpo/engine.hpp"

#include <json.hpp>

namespace mpo::cli {

inline constexpr int kScenarioSchema = 1;

struct GroupSpec {
    std::string name;
    std::vector<std::string> assets;
    double max_weight = 0.0;
};

struct DataSource {
    std::filesystem::path path;
    data::PanelMode mode = data::PanelMode::Prices;
    std::optional<std::string> benchmark;
    std::optional<data::SyntheticMarketSpec> synthetic;
};

struct Scenario {
    int schema = kScenarioSchema;
    std::string name;
    DataSource data;
    engine::LossSpec loss;  // group-mask terms are filled in by resolve_loss()
    std::vector<std::pair<std::string, std::vector<GroupSpec>>> groups;  // term label -> groups
    engine::TrainConfig train;
    std::filesystem::path output_dir;
};

Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

data::SyntheticMarketSpec parse_market_spec(const nlohmann::json& doc);

data::ReturnsPanel load_data(const Scenario& scenario);

/// LossSpec with every group mask bound to the panel's asset order.
engine::LossSpec resolve_loss(const Scenario& scenario, const data::ReturnsPanel& panel);

/// Sweep axes from {"<term label>": [values...], ...}, kept in file order.
engine::LambdaGrid parse_grid(const nlohmann::ordered_json& doc);
engine::LambdaGrid load_grid(const std::filesystem::path& path);

}  // namespace mpo::cli
