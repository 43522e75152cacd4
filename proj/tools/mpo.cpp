// mpo: gradient-descent multi-objective portfolio optimizer.
//
//   mpo run <scenario.json> [--seed N] [--out-dir DIR] [--projection softmax|sparsemax] [--optimizer gd|adam]
//   mpo sweep <scenario.json> --grid <grid.json>
//   mpo replicate <scenario.json> --k K --min-assets M [--max-assets M2] [--step 0.01]
//   mpo synth <market.json> --out <file.csv> [--prices]
//
// Exit codes: 0 ok/compliant, 1 constraints violated, 2 usage, 3 config,
// 4 ingestion, 5 training, 6 I/O.

#include <iostream>

#include <CLI11.hpp>

#include "mpo/commands.hpp"

namespace {

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string projection;
    std::string optimizer;

    void attach(CLI::App* app) {
        app->add_option("--seed", seed, "training seed (overrides the scenario)");
        app->add_option("--out-dir", out_dir, "output directory (overrides the scenario)");
        app->add_option("--projection", projection, "simplex projection")->check(CLI::IsMember({"softmax", "sparsemax"}));
        app->add_option("--optimizer", optimizer, "update rule")->check(CLI::IsMember({"gd", "adam"}));
    }

    mpo::cli::Overrides overrides() const {
        mpo::cli::Overrides o;
        o.seed = seed;
        if (!out_dir.empty()) o.out_dir = out_dir;
        if (!projection.empty()) o.projection = mpo::projection::parse_kind(projection);
        if (!optimizer.empty()) o.optimizer = mpo::engine::parse_optimizer(optimizer);
        return o;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gradient-descent multi-objective portfolio optimizer"};
    app.require_subcommand(1);

    std::string scenario, grid, spec, out;
    int k = 0;
    std::size_t min_assets = 0, max_assets = 0;
    double step = 0.01;
    bool prices = false;

    CommonFlags run_flags, sweep_flags, rep_flags;

    auto* run = app.add_subcommand("run", "train one scenario and write weights, metrics, trace and cumulative returns");
    run->add_option("scenario", scenario, "scenario file")->required();
    run_flags.attach(run);

    auto* sweep = app.add_subcommand("sweep", "train over a grid of multipliers");
    sweep->add_option("scenario", scenario, "scenario file")->required();
    sweep->add_option("--grid", grid, "grid file: {\"<term label>\": [values...]}")->required();
    sweep_flags.attach(sweep);

    auto* rep = app.add_subcommand("replicate", "compare against the simplex-grid oracle on random sub-panels");
    rep->add_option("scenario", scenario, "scenario file")->required();
    rep->add_option("--k", k, "number of replications")->required()->check(CLI::PositiveNumber);
    rep->add_option("--min-assets", min_assets, "smallest sub-universe")->required()->check(CLI::Range(2, 1000));
    rep->add_option("--max-assets", max_assets, "largest sub-universe (default: --min-assets)");
    rep->add_option("--step", step, "oracle grid step")->check(CLI::Range(1e-6, 1.0));
    rep_flags.attach(rep);

    auto* synth = app.add_subcommand("synth", "generate a synthetic market panel");
    synth->add_option("spec", spec, "market spec file")->required();
    synth->add_option("--out", out, "output CSV")->required();
    synth->add_flag("--prices", prices, "emit compounded prices instead of returns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : mpo::cli::kUsage;
    }

    try {
        if (*run) return mpo::cli::cmd_run(scenario, run_flags.overrides(), std::cout);
        if (*sweep) return mpo::cli::cmd_sweep(scenario, grid, sweep_flags.overrides(), std::cout);
        if (*rep) return mpo::cli::cmd_replicate(scenario, k, min_assets, max_assets, step, rep_flags.overrides(), std::cout);
        if (*synth) return mpo::cli::cmd_synth(spec, out, prices, std::cout);
    } catch (const std::exception& e) {
        const auto [code, message] = mpo::cli::describe_error(e);
        std::cerr << message << "\n";
        return code;
    }
    return mpo::cli::kUsage;
}
