// tailrisk: batch front end for the ARMA-APARCH / EVT / copula tail-risk
// engine. Subcommands mirror the pipeline stages; every run is a pure
// function of its input files, flags and --seed.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tailrisk/archimedean.hpp"
#include "tailrisk/hac.hpp"
#include "tailrisk/io.hpp"
#include "tailrisk/risk.hpp"

using namespace tailrisk;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    ~Timer() {
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "elapsed: %.3f s\n", s);
    }
};

ReturnTable load_returns(const std::string& path) {
    PriceTable prices = ingest_csv(path);
    for (const auto& w : prices.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (prices.dropped_rows)
        std::fprintf(stderr, "dropped %d row(s) with missing or duplicate data\n",
                     prices.dropped_rows);
    return compute_returns(prices);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

ArmaAparchSpec parse_spec(const std::string& text) {
    ArmaAparchSpec s;
    if (std::sscanf(text.c_str(), "%d,%d,%d,%d", &s.p, &s.q, &s.m, &s.n) != 4)
        throw CLI::ValidationError("--spec", "expected four comma-separated orders, e.g. 1,2,1,1");
    return s;
}

std::string ticker_structure(const HacNode& node, const std::vector<std::string>& tickers) {
    if (node.is_leaf()) return tickers[node.leaf];
    std::string s = "(";
    for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) s += ' ';
        s += ticker_structure(node.children[i], tickers);
    }
    return s + ")";
}

std::string scenarios_to_csv(const ScenarioMatrix& sc, const std::vector<std::string>& tickers) {
    std::string out;
    for (std::size_t j = 0; j < tickers.size(); ++j) {
        if (j) out += ',';
        out += tickers[j];
    }
    out += '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < sc.returns.rows(); ++i) {
        for (Eigen::Index j = 0; j < sc.returns.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.10g", sc.returns(i, j));
            if (j) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"portfolio tail-risk engine: APARCH volatility, GPD tails, "
                 "hierarchical Archimedean dependence, min-CVaR portfolios"};
    app.require_subcommand(1);

    std::string prices_path, family_name_s = "gumbel", mode_s = "hac", spec_s = "1,2,1,1";
    std::string json_out, model_out, model_in, out_prefix = "tailrisk";
    std::uint64_t seed = 0;
    int n_scenarios = 10000, window = 1000, cadence = 10, multistarts = 5, n_sim = 10000;
    double alpha = 0.95, tail_fraction = 0.10;

    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--family", family_name_s, "copula family: gumbel|clayton|frank|joe")
            ->check(CLI::IsMember({"gumbel", "clayton", "frank", "joe"}));
        cmd->add_option("--mode", mode_s, "copula mode: hac (nested) or ac (exchangeable)")
            ->check(CLI::IsMember({"hac", "ac"}));
        cmd->add_option("--spec", spec_s, "ARMA-APARCH orders p,q,m,n");
        cmd->add_option("-n,--scenarios", n_scenarios, "Monte Carlo scenario count");
        cmd->add_option("--alpha", alpha, "confidence level");
        cmd->add_option("--tail-fraction", tail_fraction, "fraction reserved per GPD tail");
        cmd->add_option("--multistarts", multistarts, "optimizer multistarts per asset");
        cmd->add_option("--seed", seed, "random seed (defaults to 0, never wall clock)");
    };

    CLI::App* stats = app.add_subcommand("stats", "descriptive statistics of returns");
    stats->add_option("prices", prices_path, "price CSV")->required();
    stats->add_option("--json", json_out, "write the JSON table here");

    CLI::App* fit = app.add_subcommand("fit", "per-asset ARMA-APARCH fits");
    fit->add_option("prices", prices_path, "price CSV")->required();
    fit->add_option("--spec", spec_s, "ARMA-APARCH orders p,q,m,n");
    fit->add_option("--multistarts", multistarts, "optimizer multistarts per asset");
    fit->add_option("--seed", seed, "random seed");
    fit->add_option("--json", json_out, "write the JSON summaries here");

    CLI::App* structure = app.add_subcommand("structure",
                                             "Kendall matrix and HAC structure of residuals");
    structure->add_option("prices", prices_path, "price CSV")->required();
    add_model_flags(structure);
    structure->add_option("--json", json_out, "write the model JSON here");

    CLI::App* simulate = app.add_subcommand("simulate", "scenario CSV from a saved model");
    simulate->add_option("--model", model_in, "model JSON from 'forecast --save-model'")
        ->required();
    simulate->add_option("-n,--scenarios", n_sim, "number of scenario rows");
    simulate->add_option("--seed", seed, "random seed");
    simulate->add_option("-o,--output", json_out, "scenario CSV path (default stdout)");

    CLI::App* forecast = app.add_subcommand("forecast", "one-step VaR/CVaR risk report");
    forecast->add_option("prices", prices_path, "price CSV")->required();
    add_model_flags(forecast);
    forecast->add_option("--report", json_out, "write the report JSON here");
    forecast->add_option("--save-model", model_out, "write the fitted model JSON here");

    CLI::App* backtest = app.add_subcommand("backtest", "rolling out-of-sample coverage test");
    backtest->add_option("prices", prices_path, "price CSV")->required();
    add_model_flags(backtest);
    backtest->add_option("--window", window, "trailing fit window length");
    backtest->add_option("--cadence", cadence, "days between refits");
    backtest->add_option("-o,--output", out_prefix, "output path prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    Timer timer;
    RunConfig cfg;
    cfg.family = family_from_name(family_name_s);
    cfg.mode = mode_s == "hac" ? RunConfig::CopulaMode::hac : RunConfig::CopulaMode::ac;
    cfg.n_scenarios = n_scenarios;
    cfg.alpha = alpha;
    cfg.tail_fraction = tail_fraction;
    cfg.spec = parse_spec(spec_s);
    cfg.window = window;
    cfg.refit_cadence = cadence;
    cfg.seed = seed;
    cfg.multistarts = multistarts;

    if (*stats) {
        ReturnTable r = load_returns(prices_path);
        std::vector<AssetStats> s = describe(r);
        std::fputs(stats_to_text(s).c_str(), stdout);
        if (!json_out.empty()) write_file(json_out, stats_to_json_string(s));
        return 0;
    }

    if (*fit) {
        ReturnTable r = load_returns(prices_path);
        nlohmann::ordered_json all = nlohmann::ordered_json::array();
        std::printf("%-10s %8s %8s %8s %8s %8s %8s %8s %8s %8s %8s %8s  %10s %8s\n", "", "mu",
                    "ar1", "ma1", "ma2", "omega", "alpha1", "gamma1", "beta1", "delta", "skew",
                    "shape", "loglik", "aic/T");
        for (Eigen::Index j = 0; j < r.returns.cols(); ++j) {
            FitOptions opt;
            opt.multistarts = cfg.multistarts;
            opt.seed = mix_u64(cfg.seed ^ (0xA55E7ull + j));
            ArmaAparchFit f = fit_arma_aparch(cfg.spec, r.returns.col(j), opt);
            nlohmann::ordered_json jf = nlohmann::ordered_json::parse(fit_to_json_string(f));
            jf["ticker"] = r.tickers[j];
            if (!f.converged) std::fprintf(stderr, "warning: %s fit did not converge\n",
                                           r.tickers[j].c_str());
            all.push_back(std::move(jf));
            Eigen::VectorXd v = f.params.flatten(cfg.spec);
            auto at = [&](const char* name) {
                for (int i = 0; i < v.size(); ++i)
                    if (ArmaAparchParams::param_name(cfg.spec, i) == name) return v[i];
                return std::numeric_limits<double>::quiet_NaN();
            };
            std::printf("%-10s %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f "
                        "%8.2f  %10.2f %8.4f\n",
                        r.tickers[j].c_str(), at("mu"), at("ar1"), at("ma1"), at("ma2"),
                        at("omega"), at("alpha1"), at("gamma1"), at("beta1"), at("delta"),
                        at("skew"), at("shape"), f.loglik, f.aic_per_obs);
        }
        if (!json_out.empty()) write_file(json_out, all.dump(2));
        return 0;
    }

    if (*structure) {
        ReturnTable r = load_returns(prices_path);
        FittedRiskModel model = fit_risk_model(r.returns, cfg, r.tickers);
        std::printf("Kendall correlation matrix of standardized residuals:\n%-10s", "");
        for (const auto& t : r.tickers) std::printf(" %9s", t.c_str());
        std::printf("\n");
        for (Eigen::Index i = 0; i < model.kendall.rows(); ++i) {
            std::printf("%-10s", r.tickers[i].c_str());
            for (Eigen::Index j = 0; j < model.kendall.cols(); ++j)
                std::printf(" %9.4f", model.kendall(i, j));
            std::printf("\n");
        }
        if (cfg.mode == RunConfig::CopulaMode::hac) {
            std::printf("\nstructure: %s\n", ticker_structure(model.hac.root, r.tickers).c_str());
            std::printf("canonical: %s\n", model.hac.structure_string.c_str());
            if (!model.hac.theta_vector.empty()) {
                std::printf("theta (root to leaf):");
                for (double th : model.hac.theta_vector) std::printf(" %.4f", th);
                std::printf("\n");
            }
        } else {
            std::printf("\nexchangeable %s copula, theta = %.4f\n", family_name_s.c_str(),
                        model.ac_theta);
        }
        if (!json_out.empty()) write_file(json_out, model_to_json_string(model));
        return 0;
    }

    if (*simulate) {
        std::ifstream in(model_in, std::ios::binary);
        if (!in) throw std::invalid_argument("cannot open model file: " + model_in);
        std::ostringstream buf;
        buf << in.rdbuf();
        FittedRiskModel model = model_from_json_string(buf.str());
        ScenarioMatrix sc = simulate_scenarios(model, n_sim, seed);
        std::vector<std::string> names = model.tickers;
        if (names.empty())
            for (int j = 0; j < model.dimension; ++j) names.push_back("A" + std::to_string(j + 1));
        std::string csv = scenarios_to_csv(sc, names);
        if (json_out.empty())
            std::fputs(csv.c_str(), stdout);
        else
            write_file(json_out, csv);
        return 0;
    }

    if (*forecast) {
        ReturnTable r = load_returns(prices_path);
        FittedRiskModel model = fit_risk_model(r.returns, cfg, r.tickers);
        ScenarioMatrix sc = simulate_scenarios(model, cfg.n_scenarios, cfg.seed);
        RiskReport rep = assess_scenarios(sc, cfg.alpha);
        std::string js = risk_report_to_json_string(rep, r.tickers);
        std::puts(js.c_str());
        if (!json_out.empty()) write_file(json_out, js);
        if (!model_out.empty()) write_file(model_out, model_to_json_string(model));
        std::fprintf(stderr, "VaR(%.0f%%) = %.4f%%  CVaR = %.4f%%  copula = %s\n",
                     100 * cfg.alpha, rep.var, rep.cvar, rep.copula.c_str());
        return 0;
    }

    if (*backtest) {
        ReturnTable r = load_returns(prices_path);
        BacktestResult res = rolling_backtest(r.returns, cfg, r.tickers);
        std::string js = backtest_to_json_string(res, cfg);
        std::puts(js.c_str());
        write_file(out_prefix + "_backtest.json", js);

        std::string hits_csv = "date,forecast_var,realized_return,hit\n";
        std::string plot;
        char buf[160];
        for (const auto& d : res.days) {
            if (d.skipped) continue;
            const std::string& date = r.dates[d.index];
            std::snprintf(buf, sizeof(buf), "%s,%.8g,%.8g,%d\n", date.c_str(), d.forecast_var,
                          d.realized_return, d.hit);
            hits_csv += buf;
            std::snprintf(buf, sizeof(buf), "%s %.8g %.8g\n", date.c_str(), d.forecast_var,
                          d.realized_return);
            plot += buf;
        }
        write_file(out_prefix + "_hits.csv", hits_csv);
        write_file(out_prefix + "_plot.dat", plot);
        std::fprintf(stderr,
                     "exceedance rate %.2f%% over %d days (UC p=%.3f, CC p=%.3f), outputs "
                     "under prefix '%s'\n",
                     100 * res.rate, res.n, res.uc_pvalue, res.cc_pvalue, out_prefix.c_str());
        return 0;
    }

    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
}
