#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mpo/data.hpp"
#include "support.hpp"

using namespace mpo;
using namespace mpo::data;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mpo_test_data";
    fs::create_directories(dir);
    return dir / name;
}

fs::path write(const std::string& name, const std::string& body) {
    const fs::path p = scratch(name);
    std::ofstream(p, std::ios::binary) << body;
    return p;
}

std::string ingestion_message(const fs::path& p) {
    try {
        read_wide_csv(p);
    } catch (const IngestionError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("simple returns from prices") {
    const auto p = write("prices.csv",
                         "date,A,B,IDX\n"
                         "2021-01-04,100,50,10\n"
                         "2021-01-05,110,50,11\n"
                         "2021-01-06,99,55,11\n");
    const ReturnsPanel r = load_panel(p, PanelMode::Prices, std::string("IDX"));
    REQUIRE(r.assets == std::vector<std::string>{"A", "B"});
    REQUIRE(r.dates == std::vector<std::string>{"2021-01-05", "2021-01-06"});
    CHECK_THAT(r.returns(0, 0), WithinAbs(0.1, 1e-15));
    CHECK_THAT(r.returns(1, 0), WithinAbs(-0.1, 1e-15));
    CHECK(r.returns(0, 1) == 0.0);
    CHECK_THAT(r.returns(1, 1), WithinAbs(0.1, 1e-15));
    REQUIRE(r.benchmark.has_value());
    CHECK_THAT((*r.benchmark)[0], WithinAbs(0.1, 1e-15));
    CHECK(r.benchmark_name == "IDX");

    const ReturnsPanel l = load_panel(p, PanelMode::LogPrices);
    CHECK(l.asset_count() == 3);
    CHECK_FALSE(l.benchmark.has_value());
    CHECK_THAT(l.returns(0, 0), WithinRel(std::log(1.1), 1e-15));
    CHECK_THAT(l.returns(1, 1), WithinRel(std::log(1.1), 1e-15));
}

TEST_CASE("returns pass through unchanged") {
    const auto p = write("returns.csv",
                         "date,A,B\n"
                         "2021-01-05,0.01,-0.02\n"
                         "2021-01-06,0.005,1e-3\n");
    const ReturnsPanel r = load_panel(p, PanelMode::Returns);
    CHECK(r.periods() == 2);
    CHECK(r.returns(0, 1) == -0.02);
    CHECK(r.returns(1, 1) == 1e-3);
}

TEST_CASE("malformed tables are ingestion errors") {
    CHECK_THAT(ingestion_message(write("dup.csv", "date,A\n2021-01-04,1\n2021-01-04,2\n2021-01-05,3\n")),
               ContainsSubstring("duplicate date 2021-01-04"));
    CHECK_THAT(ingestion_message(write("order.csv", "date,A\n2021-01-05,1\n2021-01-04,2\n")),
               ContainsSubstring("not after"));
    CHECK_THAT(ingestion_message(write("missing.csv", "date,A,B\n2021-01-04,1,\n2021-01-05,2,3\n")),
               ContainsSubstring("missing or invalid value at row 2, column 'B'"));
    CHECK_THAT(ingestion_message(write("text.csv", "date,A\n2021-01-04,abc\n")), ContainsSubstring("row 2"));
    CHECK_THAT(ingestion_message(write("ragged.csv", "date,A,B\n2021-01-04,1\n")), ContainsSubstring("cells"));
    CHECK_THAT(ingestion_message(write("header.csv", "day,A\n2021-01-04,1\n")), ContainsSubstring("date"));
    CHECK_THAT(ingestion_message(write("baddate.csv", "date,A\n04/01/2021,1\n")), ContainsSubstring("malformed date"));
    CHECK_THAT(ingestion_message(write("empty.csv", "")), ContainsSubstring("empty"));
    CHECK_THAT(ingestion_message(scratch("does-not-exist.csv")), ContainsSubstring("cannot open"));

    const auto neg = write("neg.csv", "date,A\n2021-01-04,1\n2021-01-05,0\n2021-01-06,2\n");
    CHECK_THROWS_AS(load_panel(neg, PanelMode::Prices), IngestionError);
    const auto shortp = write("short.csv", "date,A\n2021-01-04,1\n2021-01-05,2\n");
    CHECK_THROWS_AS(load_panel(shortp, PanelMode::Prices), IngestionError);
    const auto nobench = write("nobench.csv", "date,A\n2021-01-04,1\n2021-01-05,2\n2021-01-06,3\n");
    CHECK_THROWS_AS(load_panel(nobench, PanelMode::Prices, std::string("IDX")), IngestionError);
    CHECK_THROWS_AS(load_panel(nobench, PanelMode::Prices, std::string("A")), IngestionError);
}

TEST_CASE("write then read reproduces the table exactly") {
    const auto panel = testing::random_panel(7, 40, 79);
    const WideTable t = to_table(panel);
    const auto p = scratch("roundtrip.csv");
    write_wide_csv(t, p);
    const WideTable back = read_wide_csv(p);
    CHECK(back.columns == t.columns);
    CHECK(back.dates == t.dates);
    CHECK(back.values.data == t.values.data);
    CHECK_FALSE(fs::exists(p.string() + ".tmp"));

    const ReturnsPanel again = returns_passthrough(back, std::string("benchmark"));
    CHECK(again.returns.data == panel.returns.data);
    CHECK(*again.benchmark == *panel.benchmark);
}

TEST_CASE("prices compound back to the original returns") {
    const auto panel = testing::random_panel(5, 60, 83);
    const WideTable prices = to_prices(panel);
    CHECK(prices.dates.size() == 61);
    CHECK(prices.dates[0] == add_days(panel.dates[0], -1));
    const ReturnsPanel r = simple_returns(prices, std::string("benchmark"));
    CHECK(testing::max_abs_diff(r.returns.data, panel.returns.data) < 1e-12);
    CHECK(testing::max_abs_diff(*r.benchmark, *panel.benchmark) < 1e-12);
}

TEST_CASE("cumulative returns") {
    const Vector c = cumulative_returns(Vector{0.1, -0.1, 0.0});
    CHECK_THAT(c[0], WithinAbs(0.1, 1e-15));
    CHECK_THAT(c[1], WithinAbs(-0.01, 1e-15));
    CHECK_THAT(c[2], WithinAbs(-0.01, 1e-15));
    CHECK(cumulative_returns(Vector{}).empty());
}

TEST_CASE("synthetic markets are deterministic per seed") {
    const auto spec = random_market_spec(6, 100, 2, 89);
    const ReturnsPanel a = synthesize(spec);
    const ReturnsPanel b = synthesize(spec);
    CHECK(a.returns.data == b.returns.data);
    CHECK(a.assets.front() == "A000");
    CHECK(a.dates.front() == "2020-01-01");
    CHECK(a.dates.back() == add_days("2020-01-01", 99));
    const ReturnsPanel c = synthesize(random_market_spec(6, 100, 2, 90));
    CHECK(a.returns.data != c.returns.data);

    // The benchmark is the equal-weight portfolio.
    for (std::size_t t = 0; t < a.periods(); ++t) {
        double s = 0.0;
        for (std::size_t i = 0; i < 6; ++i) s += a.returns(t, i);
        CHECK_THAT((*a.benchmark)[t], WithinAbs(s / 6.0, 1e-15));
    }
}

TEST_CASE("synthetic sample moments approach the model") {
    SyntheticMarketSpec spec;
    spec.periods = 20000;
    spec.seed = 97;
    spec.means = {0.001, -0.0005};
    spec.loadings = Matrix(2, 1);
    spec.loadings(0, 0) = 0.01;
    spec.loadings(1, 0) = -0.005;
    spec.idiosyncratic = {0.01, 0.02};
    const ReturnsPanel p = synthesize(spec);
    const Matrix cov = spec.covariance();
    for (std::size_t i = 0; i < 2; ++i) {
        const Vector col = p.returns.column(i);
        CHECK_THAT(oracle::mean(col), WithinAbs(spec.means[i], 4.0 * std::sqrt(cov(i, i) / 20000.0)));
        CHECK_THAT(oracle::stddev(col), WithinRel(std::sqrt(cov(i, i)), 0.03));
    }
}

TEST_CASE("synthetic spec validation") {
    SyntheticMarketSpec spec;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = random_market_spec(3, 10, 1, 1);
    spec.idiosyncratic[0] = -1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = random_market_spec(3, 10, 1, 1);
    spec.names = {"a", "b"};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = random_market_spec(3, 10, 1, 1);
    spec.start_date = "2020-1-1";
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("calendar arithmetic") {
    CHECK(add_days("2020-02-28", 1) == "2020-02-29");
    CHECK(add_days("2021-02-28", 1) == "2021-03-01");
    CHECK(add_days("2020-12-31", 1) == "2021-01-01");
    CHECK(add_days("2020-01-01", -1) == "2019-12-31");
    CHECK(add_days("2000-03-01", -1) == "2000-02-29");
    CHECK(add_days("1900-03-01", -1) == "1900-02-28");
    CHECK(add_days("2020-01-02", 365) == "2021-01-01");
    CHECK_THROWS_AS(add_days("2020-13-01", 1), InputError);
}

TEST_CASE("panel selection") {
    const auto panel = testing::random_panel(5, 20, 101);
    const ReturnsPanel s = panel.select({1, 3}, 5, 9);
    CHECK(s.assets == std::vector<std::string>{"A001", "A003"});
    CHECK(s.periods() == 4);
    CHECK(s.returns(0, 1) == panel.returns(5, 3));
    CHECK(s.benchmark->size() == 4);
    CHECK(panel.asset_index("A004") == 4);
    CHECK_FALSE(panel.asset_index("B").has_value());
    CHECK_THROWS_AS(panel.select({0}, 5, 5), InputError);
    CHECK_THROWS_AS(panel.select({9}, 0, 3), InputError);
}

TEST_CASE("panel modes") {
    CHECK(parse_mode("log-prices") == PanelMode::LogPrices);
    CHECK_FALSE(parse_mode("yields").has_value());
    CHECK(to_string(PanelMode::Returns) == "returns");
}
