#pragma once

// Return panels: CSV ingestion, return computation and a seeded factor-model
// market generator.
//
// CSV layout (UTF-8, LF, '.' decimals, no quoting):
//   date,ASSET1,ASSET2,...
//   2020-01-02,0.0012,-0.0031,...
// Dates must be strictly increasing ISO-8601 strings. Missing cells are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpo/common.hpp"

namespace mpo::data {

struct ReturnsPanel {
    std::vector<std::string> assets;
    std::vector<std::string> dates;
    Matrix returns;  // periods x assets
    std::optional<Vector> benchmark;
    std::string benchmark_name;

    std::size_t periods() const { return returns.rows; }
    std::size_t asset_count() const { return returns.cols; }

    /// Sub-panel over the given columns and the half-open period range [first, last).
    ReturnsPanel select(const std::vector<std::size_t>& columns, std::size_t first, std::size_t last) const;
    std::optional<std::size_t> asset_index(const std::string& name) const;
};

/// Raw wide table as read from disk (prices or returns, benchmark still a column).
struct WideTable {
    std::vector<std::string> columns;
    std::vector<std::string> dates;
    Matrix values;
};

enum class PanelMode { Prices, Returns, LogPrices };

std::optional<PanelMode> parse_mode(const std::string& name);
std::string to_string(PanelMode mode);

WideTable read_wide_csv(const std::filesystem::path& path);
void write_wide_csv(const WideTable& table, const std::filesystem::path& path);

/// p_t / p_{t-1} - 1, dropping the first row.
ReturnsPanel simple_returns(const WideTable& prices, const std::optional<std::string>& benchmark_column = {});
/// ln(p_t / p_{t-1}), dropping the first row. Prices must be positive.
ReturnsPanel log_returns(const WideTable& prices, const std::optional<std::string>& benchmark_column = {});
ReturnsPanel returns_passthrough(const WideTable& returns, const std::optional<std::string>& benchmark_column = {});

ReturnsPanel load_panel(const std::filesystem::path& path, PanelMode mode,
                        const std::optional<std::string>& benchmark_column = {});

/// Re-emits a panel in returns mode; the benchmark (if any) becomes the last column.
WideTable to_table(const ReturnsPanel& panel);
/// Compounds returns into a price table starting at `start` on a base date one day before the first period.
WideTable to_prices(const ReturnsPanel& panel, double start = 100.0);

/// prod(1 + r_t) - 1 at every t.
Vector cumulative_returns(std::span<const double> r);

struct SyntheticMarketSpec {
    std::size_t periods = 0;
    Vector means;            // n
    Matrix loadings;         // n x k
    Vector idiosyncratic;    // n, per-asset noise volatility
    std::uint64_t seed = 0;
    std::string start_date = "2020-01-01";
    std::vector<std::string> names;  // optional; defaults to A000, A001, ...

    std::size_t assets() const { return means.size(); }
    /// B B^T + diag(idiosyncratic^2).
    Matrix covariance() const;
    void validate() const;
};

struct MarketRanges {
    double mean_lo = 0.0002, mean_hi = 0.0012;
    double loading_lo = 0.002, loading_hi = 0.010;
    double idio_lo = 0.005, idio_hi = 0.015;
};

SyntheticMarketSpec random_market_spec(std::size_t assets, std::size_t periods, std::size_t factors,
                                       std::uint64_t seed, const MarketRanges& ranges = {});

/// Seeded factor-model returns; the equal-weight average of all assets is the benchmark column.
ReturnsPanel synthesize(const SyntheticMarketSpec& spec);

/// Writes to a sibling temporary file, then renames over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// ISO date `days` days after `iso` (proleptic Gregorian).
std::string add_days(const std::string& iso, long days);

}  // namespace mpo::data
