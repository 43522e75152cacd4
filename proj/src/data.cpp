#include "mpo/data.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace mpo::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* first = text.data();
    const char* last = first + text.size();
    if (*first == '+') ++first;
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

bool is_iso_date(const std::string& d) {
    if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (d[i] < '0' || d[i] > '9') return false;
    const int y = std::stoi(d.substr(0, 4)), m = std::stoi(d.substr(5, 2)), day = std::stoi(d.substr(8, 2));
    if (m < 1 || m > 12 || day < 1) return false;
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return day <= kDays[m - 1] + (m == 2 && leap ? 1 : 0);
}

// Days since 1970-01-01 for a proleptic Gregorian date.
long days_from_civil(long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, long& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<long>(yoe) + era * 400 + (m <= 2);
}

struct Split {
    std::vector<std::size_t> asset_cols;
    std::optional<std::size_t> bench_col;
};

Split split_columns(const WideTable& t, const std::optional<std::string>& benchmark_column) {
    Split s;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (benchmark_column && t.columns[c] == *benchmark_column)
            s.bench_col = c;
        else
            s.asset_cols.push_back(c);
    }
    if (benchmark_column && !s.bench_col)
        throw IngestionError("benchmark column '" + *benchmark_column + "' not found");
    if (s.asset_cols.empty()) throw IngestionError("panel has no asset columns");
    return s;
}

template <typename F>
ReturnsPanel from_prices(const WideTable& prices, const std::optional<std::string>& benchmark_column, F ret) {
    if (prices.dates.size() < 3)
        throw IngestionError("need at least 3 price rows, got " + std::to_string(prices.dates.size()));
    const Split s = split_columns(prices, benchmark_column);
    const std::size_t T = prices.dates.size() - 1;
    ReturnsPanel p;
    for (std::size_t c : s.asset_cols) p.assets.push_back(prices.columns[c]);
    p.dates.assign(prices.dates.begin() + 1, prices.dates.end());
    p.returns = Matrix(T, s.asset_cols.size());
    auto compute = [&](std::size_t t, std::size_t c) {
        const double prev = prices.values(t, c), cur = prices.values(t + 1, c);
        if (!(prev > 0.0) || !(cur > 0.0))
            throw IngestionError("nonpositive price at row " + std::to_string(prev > 0.0 ? t + 3 : t + 2) +
                                 ", column '" + prices.columns[c] + "'");
        return ret(prev, cur);
    };
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < s.asset_cols.size(); ++j) p.returns(t, j) = compute(t, s.asset_cols[j]);
    if (s.bench_col) {
        p.benchmark_name = prices.columns[*s.bench_col];
        p.benchmark = Vector(T);
        for (std::size_t t = 0; t < T; ++t) (*p.benchmark)[t] = compute(t, *s.bench_col);
    }
    return p;
}

}  // namespace

std::optional<PanelMode> parse_mode(const std::string& name) {
    if (name == "prices") return PanelMode::Prices;
    if (name == "returns") return PanelMode::Returns;
    if (name == "log-prices") return PanelMode::LogPrices;
    return std::nullopt;
}

std::string to_string(PanelMode mode) {
    switch (mode) {
        case PanelMode::Prices: return "prices";
        case PanelMode::Returns: return "returns";
        case PanelMode::LogPrices: return "log-prices";
    }
    return "?";
}

ReturnsPanel ReturnsPanel::select(const std::vector<std::size_t>& columns, std::size_t first, std::size_t last) const {
    if (first >= last || last > periods()) throw InputError("select: invalid period range");
    ReturnsPanel p;
    p.benchmark_name = benchmark_name;
    p.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first), dates.begin() + static_cast<std::ptrdiff_t>(last));
    p.returns = Matrix(last - first, columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] >= asset_count()) throw InputError("select: column out of range");
        p.assets.push_back(assets[columns[j]]);
        for (std::size_t t = first; t < last; ++t) p.returns(t - first, j) = returns(t, columns[j]);
    }
    if (benchmark) p.benchmark = Vector(benchmark->begin() + static_cast<std::ptrdiff_t>(first),
                                        benchmark->begin() + static_cast<std::ptrdiff_t>(last));
    return p;
}

std::optional<std::size_t> ReturnsPanel::asset_index(const std::string& name) const {
    for (std::size_t i = 0; i < assets.size(); ++i)
        if (assets[i] == name) return i;
    return std::nullopt;
}

WideTable read_wide_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IngestionError(path.string() + ": empty file");
    auto header = split_csv_line(line);
    for (auto& h : header) h = trim(h);
    if (header.empty() || header[0] != "date")
        throw IngestionError(path.string() + ": header must start with 'date'");
    WideTable t;
    t.columns.assign(header.begin() + 1, header.end());
    if (t.columns.empty()) throw IngestionError(path.string() + ": no data columns");

    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw IngestionError(path.string() + ": row " + std::to_string(lineno) + " has " +
                                 std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
        const std::string date = trim(cells[0]);
        if (!is_iso_date(date))
            throw IngestionError(path.string() + ": row " + std::to_string(lineno) + ": malformed date '" + date + "'");
        if (!t.dates.empty()) {
            if (date == t.dates.back())
                throw IngestionError(path.string() + ": row " + std::to_string(lineno) + ": duplicate date " + date);
            if (date < t.dates.back())
                throw IngestionError(path.string() + ": row " + std::to_string(lineno) + ": date " + date +
                                     " is not after " + t.dates.back());
        }
        t.dates.push_back(date);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            double v = 0.0;
            if (!parse_double(trim(cells[c]), v))
                throw IngestionError(path.string() + ": missing or invalid value at row " + std::to_string(lineno) +
                                     ", column '" + header[c] + "'");
            values.push_back(v);
        }
    }
    t.values = Matrix(t.dates.size(), t.columns.size());
    t.values.data = std::move(values);
    return t;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_wide_csv(const WideTable& table, const std::filesystem::path& path) {
    std::string s = "date";
    for (const auto& c : table.columns) s += "," + c;
    s += "\n";
    for (std::size_t t = 0; t < table.dates.size(); ++t) {
        s += table.dates[t];
        for (std::size_t c = 0; c < table.columns.size(); ++c) s += "," + format_number(table.values(t, c));
        s += "\n";
    }
    write_text_atomic(path, s);
}

ReturnsPanel simple_returns(const WideTable& prices, const std::optional<std::string>& benchmark_column) {
    return from_prices(prices, benchmark_column, [](double prev, double cur) { return cur / prev - 1.0; });
}

ReturnsPanel log_returns(const WideTable& prices, const std::optional<std::string>& benchmark_column) {
    return from_prices(prices, benchmark_column, [](double prev, double cur) { return std::log(cur / prev); });
}

ReturnsPanel returns_passthrough(const WideTable& table, const std::optional<std::string>& benchmark_column) {
    if (table.dates.size() < 2)
        throw IngestionError("need at least 2 return rows, got " + std::to_string(table.dates.size()));
    const Split s = split_columns(table, benchmark_column);
    ReturnsPanel p;
    p.dates = table.dates;
    p.returns = Matrix(table.dates.size(), s.asset_cols.size());
    for (std::size_t j = 0; j < s.asset_cols.size(); ++j) {
        p.assets.push_back(table.columns[s.asset_cols[j]]);
        for (std::size_t t = 0; t < table.dates.size(); ++t) p.returns(t, j) = table.values(t, s.asset_cols[j]);
    }
    if (s.bench_col) {
        p.benchmark_name = table.columns[*s.bench_col];
        p.benchmark = table.values.column(*s.bench_col);
    }
    return p;
}

ReturnsPanel load_panel(const std::filesystem::path& path, PanelMode mode,
                        const std::optional<std::string>& benchmark_column) {
    const WideTable t = read_wide_csv(path);
    switch (mode) {
        case PanelMode::Prices: return simple_returns(t, benchmark_column);
        case PanelMode::LogPrices: return log_returns(t, benchmark_column);
        case PanelMode::Returns: return returns_passthrough(t, benchmark_column);
    }
    throw ConfigError("unknown panel mode");
}

WideTable to_table(const ReturnsPanel& panel) {
    WideTable t;
    t.columns = panel.assets;
    t.dates = panel.dates;
    const std::size_t extra = panel.benchmark ? 1 : 0;
    if (panel.benchmark) t.columns.push_back(panel.benchmark_name.empty() ? "benchmark" : panel.benchmark_name);
    t.values = Matrix(panel.periods(), panel.asset_count() + extra);
    for (std::size_t r = 0; r < panel.periods(); ++r) {
        for (std::size_t c = 0; c < panel.asset_count(); ++c) t.values(r, c) = panel.returns(r, c);
        if (panel.benchmark) t.values(r, panel.asset_count()) = (*panel.benchmark)[r];
    }
    return t;
}

WideTable to_prices(const ReturnsPanel& panel, double start) {
    const WideTable r = to_table(panel);
    WideTable p;
    p.columns = r.columns;
    p.dates.push_back(panel.dates.empty() ? std::string("1970-01-01") : add_days(panel.dates.front(), -1));
    p.dates.insert(p.dates.end(), panel.dates.begin(), panel.dates.end());
    p.values = Matrix(r.dates.size() + 1, r.columns.size());
    for (std::size_t c = 0; c < r.columns.size(); ++c) {
        p.values(0, c) = start;
        for (std::size_t t = 0; t < r.dates.size(); ++t) p.values(t + 1, c) = p.values(t, c) * (1.0 + r.values(t, c));
    }
    return p;
}

Vector cumulative_returns(std::span<const double> r) {
    Vector out(r.size());
    double growth = 1.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        growth *= 1.0 + r[t];
        out[t] = growth - 1.0;
    }
    return out;
}

Matrix SyntheticMarketSpec::covariance() const {
    const std::size_t n = assets();
    Matrix c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < loadings.cols; ++k) s += loadings(i, k) * loadings(j, k);
            c(i, j) = s + (i == j ? idiosyncratic[i] * idiosyncratic[i] : 0.0);
        }
    return c;
}

void SyntheticMarketSpec::validate() const {
    if (means.empty()) throw ConfigError("synthetic market needs at least one asset");
    if (periods < 2) throw ConfigError("synthetic market needs at least 2 periods");
    if (loadings.rows != means.size() && !(loadings.rows == 0 && loadings.cols == 0))
        throw ConfigError("loadings must have one row per asset");
    if (idiosyncratic.size() != means.size()) throw ConfigError("idiosyncratic vector must have one entry per asset");
    for (double s : idiosyncratic)
        if (s < 0.0) throw ConfigError("idiosyncratic volatility must be nonnegative");
    if (!names.empty() && names.size() != means.size()) throw ConfigError("names must have one entry per asset");
    if (!is_iso_date(start_date)) throw ConfigError("start_date must be YYYY-MM-DD");
}

SyntheticMarketSpec random_market_spec(std::size_t assets, std::size_t periods, std::size_t factors,
                                       std::uint64_t seed, const MarketRanges& r) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mean(r.mean_lo, r.mean_hi);
    std::uniform_real_distribution<double> load(r.loading_lo, r.loading_hi);
    std::uniform_real_distribution<double> idio(r.idio_lo, r.idio_hi);
    SyntheticMarketSpec s;
    s.periods = periods;
    s.seed = seed ^ 0x9e3779b97f4a7c15ULL;
    s.means.resize(assets);
    s.loadings = Matrix(assets, factors);
    s.idiosyncratic.resize(assets);
    for (std::size_t i = 0; i < assets; ++i) {
        s.means[i] = mean(rng);
        for (std::size_t k = 0; k < factors; ++k) s.loadings(i, k) = load(rng);
        s.idiosyncratic[i] = idio(rng);
    }
    return s;
}

ReturnsPanel synthesize(const SyntheticMarketSpec& spec) {
    spec.validate();
    const std::size_t n = spec.assets(), T = spec.periods, K = spec.loadings.cols;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    ReturnsPanel p;
    for (std::size_t i = 0; i < n; ++i) {
        if (!spec.names.empty()) {
            p.assets.push_back(spec.names[i]);
        } else {
            std::string id = std::to_string(i);
            p.assets.push_back("A" + std::string(id.size() < 3 ? 3 - id.size() : 0, '0') + id);
        }
    }
    p.returns = Matrix(T, n);
    p.benchmark = Vector(T);
    p.benchmark_name = "benchmark";
    Vector f(K);
    for (std::size_t t = 0; t < T; ++t) {
        p.dates.push_back(add_days(spec.start_date, static_cast<long>(t)));
        for (auto& v : f) v = normal(rng);
        double avg = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = spec.means[i];
            for (std::size_t k = 0; k < K; ++k) r += spec.loadings(i, k) * f[k];
            r += spec.idiosyncratic[i] * normal(rng);
            p.returns(t, i) = r;
            avg += r;
        }
        (*p.benchmark)[t] = avg / static_cast<double>(n);
    }
    return p;
}

std::string add_days(const std::string& iso, long days) {
    if (!is_iso_date(iso)) throw InputError("malformed date '" + iso + "'");
    const long y = std::stol(iso.substr(0, 4));
    const auto m = static_cast<unsigned>(std::stoul(iso.substr(5, 2)));
    const auto d = static_cast<unsigned>(std::stoul(iso.substr(8, 2)));
    long yy = 0;
    unsigned mm = 0, dd = 0;
    civil_from_days(days_from_civil(y, m, d) + days, yy, mm, dd);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", yy, mm, dd);
    return buf;
}

}  // namespace mpo::data
