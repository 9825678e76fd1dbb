#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "oracles.hpp"
#include "schema_check.hpp"
#include "tailrisk/io.hpp"
#include "tailrisk/rng.hpp"

using namespace tailrisk;

#ifndef TAILRISK_SOURCE_DIR
#define TAILRISK_SOURCE_DIR "."
#endif

namespace {

nlohmann::json load_schema(const std::string& name) {
    std::ifstream in(std::string(TAILRISK_SOURCE_DIR) + "/schemas/" + name);
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    return j;
}

}  // namespace

TEST_CASE("ingest: well-formed, out-of-order, missing fields, hard errors") {
    PriceTable t = ingest_csv_text(
        "date,AAA,BBB\n2020-01-01,100,50\n2020-01-02,101,49\n2020-01-03,103,51\n");
    CHECK(t.dates.size() == 3);
    CHECK(t.tickers == std::vector<std::string>{"AAA", "BBB"});
    CHECK(t.close(2, 1) == 51.0);
    CHECK(t.dropped_rows == 0);

    PriceTable shuffled = ingest_csv_text(
        "date,AAA\n2020-01-03,103\n2020-01-01,100\n2020-01-02,101\n");
    CHECK(shuffled.dates == std::vector<std::string>{"2020-01-01", "2020-01-02", "2020-01-03"});
    CHECK(shuffled.warnings.size() == 1);

    PriceTable missing = ingest_csv_text(
        "date,AAA,BBB\n2020-01-01,100,50\n2020-01-02,,49\n2020-01-03,103,51\n");
    CHECK(missing.dates.size() == 2);
    CHECK(missing.dropped_rows == 1);

    PriceTable dup = ingest_csv_text(
        "date,AAA\n2020-01-01,100\n2020-01-01,101\n2020-01-02,102\n");
    CHECK(dup.dates.size() == 2);
    CHECK(dup.close(0, 0) == 100.0);

    CHECK_THROWS_WITH_AS(ingest_csv_text("date,AAA\n2020-01-01,abc\n"),
                         doctest::Contains("line 2"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(ingest_csv_text("date,AAA\n2020-01-01,-3\n"),
                         doctest::Contains("non-positive"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(ingest_csv_text("date,AAA\n01/02/2020,100\n"),
                         doctest::Contains("ISO"), std::invalid_argument);
    CHECK_THROWS_AS(ingest_csv_text("price,AAA\n"), std::invalid_argument);
    CHECK_THROWS_AS(ingest_csv("/no/such/file.csv"), std::invalid_argument);
}

TEST_CASE("compute_returns: percent log-returns") {
    PriceTable t = ingest_csv_text("date,AAA\n2020-01-01,100\n2020-01-02,105\n2020-01-03,94.5\n");
    ReturnTable r = compute_returns(t);
    CHECK(r.returns.rows() == 2);
    CHECK(r.returns(0, 0) == doctest::Approx(100.0 * std::log(1.05)).epsilon(1e-12));
    CHECK(r.returns(0, 0) == doctest::Approx(4.8790).epsilon(1e-4));
    CHECK(r.returns(1, 0) == doctest::Approx(100.0 * std::log(0.9)).epsilon(1e-12));
    CHECK(r.dates == std::vector<std::string>{"2020-01-02", "2020-01-03"});

    PriceTable flat = ingest_csv_text("date,AAA\n2020-01-01,70\n2020-01-02,70\n2020-01-03,70\n");
    CHECK(compute_returns(flat).returns.cwiseAbs().maxCoeff() == 0.0);

    PriceTable one = ingest_csv_text("date,AAA\n2020-01-01,100\n");
    CHECK_THROWS_AS(compute_returns(one), std::invalid_argument);
}

TEST_CASE("describe: normal oracle, published-table magnitudes, degenerate flag") {
    // large normal sample: kurtosis ~ 3 and the normality test does not reject
    RngStream rng(12);
    ReturnTable r;
    r.tickers = {"N"};
    r.returns.resize(1000000, 1);
    for (int i = 0; i < r.returns.rows(); ++i) r.returns(i, 0) = rng.next_gaussian();
    std::vector<AssetStats> s = describe(r);
    CHECK(s[0].kurtosis == doctest::Approx(3.0).epsilon(0.02));
    CHECK(std::fabs(s[0].skewness) < 0.01);
    CHECK(s[0].jb_pvalue > 0.01);

    // JB formula at the S&P-row sample moments lands near the published 18515
    {
        double n = 3343, S = -0.3723, K = 14.3147;
        double jb = n / 6.0 * (S * S + 0.25 * (K - 3) * (K - 3));
        CHECK(jb == doctest::Approx(17909.8).epsilon(1e-3));
        CHECK(std::fabs(jb / 18515.0 - 1.0) < 0.05);
    }

    ReturnTable flat;
    flat.tickers = {"C"};
    flat.returns = Eigen::MatrixXd::Zero(100, 1);
    std::vector<AssetStats> fs = describe(flat);
    CHECK(fs[0].degenerate);
    CHECK(fs[0].stddev == 0.0);

    std::string text = stats_to_text(fs);
    CHECK(text.find("degenerate") != std::string::npos);
}

TEST_CASE("emitted stats json validates against the published schema") {
    PriceTable t = ingest_csv_text(
        "date,AAA,BBB\n2020-01-01,100,50\n2020-01-02,101,49\n2020-01-03,103,51\n"
        "2020-01-04,102,50\n2020-01-05,104,52\n2020-01-06,101,53\n2020-01-07,105,51\n"
        "2020-01-08,106,54\n2020-01-09,104,53\n");
    std::vector<AssetStats> s = describe(compute_returns(t));
    nlohmann::json doc = nlohmann::json::parse(stats_to_json_string(s));
    CHECK_NOTHROW(schema_check::validate(doc, load_schema("stats.schema.json")));
}
