// End-to-end exercises of the command-line interface: each case shells out to
// the real binary so flag handling, exit codes and emitted files are tested
// exactly as a user sees them.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/stat.h>
#include <sys/wait.h>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "schema_check.hpp"
#include "tailrisk/rng.hpp"
#include "tailrisk/sstd.hpp"
#include "tailrisk/special.hpp"

#ifndef TAILRISK_CLI_PATH
#define TAILRISK_CLI_PATH "./tailrisk"
#endif
#ifndef TAILRISK_SOURCE_DIR
#define TAILRISK_SOURCE_DIR "."
#endif

namespace {

struct RunResult {
    int exit_code;
    std::string out, err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunResult run_cli(const std::string& args) {
    std::string base = "cli_tmp/last";
    std::string cmd = std::string(TAILRISK_CLI_PATH) + " " + args + " > " + base + ".out 2> " +
                      base + ".err";
    int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(base + ".out");
    r.err = slurp(base + ".err");
    return r;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// prices whose returns follow a multivariate normal with a given Kendall
// matrix (Gaussian rank transform rho = sin(pi tau / 2))
std::string synth_prices_from_tau(const Eigen::MatrixXd& tau,
                                  const std::vector<std::string>& tickers, int t_len,
                                  std::uint64_t seed) {
    const int d = static_cast<int>(tau.rows());
    Eigen::MatrixXd rho(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            rho(i, j) = i == j ? 1.0 : std::sin(M_PI * tau(i, j) / 2.0);
    Eigen::LLT<Eigen::MatrixXd> llt(rho);
    REQUIRE(llt.info() == Eigen::Success);
    Eigen::MatrixXd chol = llt.matrixL();

    tailrisk::RngStream rng(tailrisk::substream(seed, 0x9A1E));
    std::string csv = "date";
    for (const auto& t : tickers) csv += "," + t;
    csv += "\n";
    Eigen::VectorXd logp = Eigen::VectorXd::Constant(d, std::log(100.0));
    char buf[64];
    for (int t = 0; t < t_len; ++t) {
        Eigen::VectorXd z(d);
        for (int j = 0; j < d; ++j) z[j] = rng.next_gaussian();
        Eigen::VectorXd r = chol * z;  // percent returns
        logp += r / 100.0;
        int y = 2000 + t / 372, m = 1 + (t / 31) % 12, dd = 1 + t % 31;
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, dd);
        csv += buf;
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.8f", std::exp(logp[j]));
            csv += buf;
        }
        csv += "\n";
    }
    return csv;
}

// two-asset GARCH-like panel written as prices
std::string small_panel_csv(int t_len, std::uint64_t seed) {
    tailrisk::RngStream rng(tailrisk::substream(seed, 0x77));
    tailrisk::SstdDist innov(1.05, 7.0);
    std::string csv = "date,AAA,BBB\n";
    double lp1 = std::log(100.0), lp2 = std::log(50.0);
    double s1 = 1.0, s2 = 1.0;
    char buf[96];
    for (int t = 0; t < t_len; ++t) {
        double z_common = innov.quantile(rng.next_uniform());
        double r1 = 0.02 + s1 * z_common;
        double r2 = 0.01 + s2 * (0.6 * z_common + 0.8 * innov.quantile(rng.next_uniform()));
        s1 = std::sqrt(0.05 + 0.08 * r1 * r1 + 0.85 * s1 * s1);
        s2 = std::sqrt(0.08 + 0.10 * r2 * r2 + 0.80 * s2 * s2);
        lp1 += r1 / 100.0;
        lp2 += r2 / 100.0;
        int y = 2005 + t / 372, m = 1 + (t / 31) % 12, dd = 1 + t % 31;
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d,%.8f,%.8f\n", y, m, dd, std::exp(lp1),
                      std::exp(lp2));
        csv += buf;
    }
    return csv;
}

nlohmann::json load_schema(const std::string& name) {
    std::ifstream in(std::string(TAILRISK_SOURCE_DIR) + "/schemas/" + name);
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    return j;
}

struct TmpDir {
    TmpDir() { mkdir("cli_tmp", 0755); }
} tmpdir_guard;

}  // namespace

TEST_CASE("usage and data-error exit codes") {
    CHECK(run_cli("--definitely-not-a-flag").exit_code == 2);
    CHECK(run_cli("stats /no/such/file.csv").exit_code == 3);
    CHECK(run_cli("").exit_code == 2);
    RunResult help = run_cli("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.out.find("forecast") != std::string::npos);
}

TEST_CASE("stats subcommand prints the table and writes schema-valid json") {
    write_file("cli_tmp/prices.csv", small_panel_csv(400, 1));
    RunResult r = run_cli("stats cli_tmp/prices.csv --json cli_tmp/stats.json");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("AAA") != std::string::npos);
    CHECK(r.out.find("Kurtosis") != std::string::npos);
    nlohmann::json doc = nlohmann::json::parse(slurp("cli_tmp/stats.json"));
    CHECK_NOTHROW(schema_check::validate(doc, load_schema("stats.schema.json")));
    CHECK(doc.size() == 2);
}

TEST_CASE("fit subcommand emits schema-valid per-asset summaries") {
    write_file("cli_tmp/prices.csv", small_panel_csv(700, 2));
    RunResult r = run_cli(
        "fit cli_tmp/prices.csv --spec 0,0,1,1 --multistarts 1 --json cli_tmp/fits.json");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("omega") != std::string::npos);
    nlohmann::json doc = nlohmann::json::parse(slurp("cli_tmp/fits.json"));
    REQUIRE(doc.size() == 2);
    nlohmann::json schema = load_schema("fit_summary.schema.json");
    for (const auto& f : doc) CHECK_NOTHROW(schema_check::validate(f, schema));
}

TEST_CASE("structure recovers the synthesized hierarchy from rank-transformed data") {
    Eigen::MatrixXd tau(5, 5);
    tau << 1.0000, 0.6978, -0.0012, 0.0350, 0.0014,  //
        0.6978, 1.0000, 0.0048, 0.0369, -0.0010,     //
        -0.0012, 0.0048, 1.0000, 0.0144, 0.0032,     //
        0.0350, 0.0369, 0.0144, 1.0000, -0.0027,     //
        0.0014, -0.0010, 0.0032, -0.0027, 1.0000;
    std::vector<std::string> tickers = {"SP500", "NASDAQ", "CAC40", "DAX30", "BRVM"};
    write_file("cli_tmp/indices.csv", synth_prices_from_tau(tau, tickers, 15000, 42));
    RunResult r = run_cli(
        "structure cli_tmp/indices.csv --family gumbel --multistarts 1 "
        "--json cli_tmp/model.json");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("((((SP500 NASDAQ) DAX30) CAC40) BRVM)") != std::string::npos);
    nlohmann::json doc = nlohmann::json::parse(slurp("cli_tmp/model.json"));
    CHECK_NOTHROW(schema_check::validate(doc.at("copula"), load_schema("hac_model.schema.json")));
    nlohmann::json mschema = load_schema("margin.schema.json");
    for (const auto& a : doc.at("assets"))
        CHECK_NOTHROW(schema_check::validate(a.at("margin"), mschema));
}

TEST_CASE("forecast is byte-deterministic and its report validates; simulate round-trips") {
    write_file("cli_tmp/panel.csv", small_panel_csv(800, 3));
    std::string flags =
        "forecast cli_tmp/panel.csv --mode hac --family clayton --multistarts 1 "
        "-n 2000 --seed 11 --report cli_tmp/rep_a.json --save-model cli_tmp/model.json";
    CHECK(run_cli(flags).exit_code == 0);
    std::string flags_b =
        "forecast cli_tmp/panel.csv --mode hac --family clayton --multistarts 1 "
        "-n 2000 --seed 11 --report cli_tmp/rep_b.json";
    CHECK(run_cli(flags_b).exit_code == 0);
    CHECK(slurp("cli_tmp/rep_a.json") == slurp("cli_tmp/rep_b.json"));

    nlohmann::json rep = nlohmann::json::parse(slurp("cli_tmp/rep_a.json"));
    CHECK_NOTHROW(schema_check::validate(rep, load_schema("risk_report.schema.json")));
    CHECK(rep.at("cvar").get<double>() >= rep.at("var").get<double>());
    CHECK(rep.at("copula") == "hac-clayton");

    // scenarios re-ingested as returns match the generating model's one-step law
    RunResult sim = run_cli("simulate --model cli_tmp/model.json -n 4000 --seed 3 "
                            "-o cli_tmp/scen.csv");
    CHECK(sim.exit_code == 0);
    nlohmann::json model = nlohmann::json::parse(slurp("cli_tmp/model.json"));
    std::ifstream in("cli_tmp/scen.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "AAA,BBB");
    std::vector<double> col0, col1;
    while (std::getline(in, line)) {
        double a, b;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf", &a, &b) == 2);
        col0.push_back(a);
        col1.push_back(b);
    }
    REQUIRE(col0.size() == 4000);
    for (int j = 0; j < 2; ++j) {
        const std::vector<double>& col = j ? col1 : col0;
        double mu = model.at("assets").at(j).at("mu_next").get<double>();
        double sig = model.at("assets").at(j).at("sigma_next").get<double>();
        double mean = 0, sq = 0;
        for (double v : col) mean += v;
        mean /= col.size();
        for (double v : col) sq += (v - mean) * (v - mean);
        double sd = std::sqrt(sq / (col.size() - 1.0));
        CHECK(std::fabs(mean - mu) < 4.0 * sig / std::sqrt(4000.0) + 0.02 * sig);
        CHECK(sd == doctest::Approx(sig).epsilon(0.10));
    }
}

TEST_CASE("backtest: precondition error and a small full run with artifacts") {
    write_file("cli_tmp/short.csv", small_panel_csv(300, 4));
    RunResult bad = run_cli("backtest cli_tmp/short.csv --window 1000");
    CHECK(bad.exit_code == 3);
    CHECK(bad.err.find("window") != std::string::npos);

    write_file("cli_tmp/bt.csv", small_panel_csv(600, 5));
    RunResult ok = run_cli(
        "backtest cli_tmp/bt.csv --window 450 --cadence 40 -n 1000 --multistarts 1 "
        "--seed 2 -o cli_tmp/bt");
    CHECK(ok.exit_code == 0);
    nlohmann::json doc = nlohmann::json::parse(slurp("cli_tmp/bt_backtest.json"));
    CHECK_NOTHROW(schema_check::validate(doc, load_schema("backtest_result.schema.json")));
    CHECK(doc.at("n").get<int>() + doc.at("skipped_days").get<int>() == 149);

    std::string hits = slurp("cli_tmp/bt_hits.csv");
    CHECK(hits.rfind("date,forecast_var,realized_return,hit", 0) == 0);
    std::string plot = slurp("cli_tmp/bt_plot.dat");
    double v1, v2;
    char date[16];
    REQUIRE(std::sscanf(plot.c_str(), "%15s %lf %lf", date, &v1, &v2) == 3);
    CHECK(v1 > 0.0);
}
