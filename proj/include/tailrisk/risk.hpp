#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tailrisk/archimedean.hpp"
#include "tailrisk/evt.hpp"
#include "tailrisk/hac.hpp"
#include "tailrisk/volatility.hpp"

namespace tailrisk {

// ---------------------------------------------------------------------------
// risk measures

// Left-continuous generalized inverse: order statistic at rank ceil(alpha N)
// of the losses sorted ascending.
double var_empirical(const Eigen::Ref<const Eigen::VectorXd>& losses, double alpha);

struct CvarResult {
    double var = 0.0;
    double cvar = 0.0;         // mean of losses strictly beyond var
    double mean_excess = 0.0;  // cvar - var
    bool no_exceedance = false;
};

CvarResult cvar_empirical(const Eigen::Ref<const Eigen::VectorXd>& losses, double alpha);

// The discrete Rockafellar-Uryasev objective min_zeta zeta + E(L-zeta)^+/(1-a):
// the quantity the weight LP minimizes; also the grid-search oracle target.
double rockafellar_uryasev_objective(const Eigen::Ref<const Eigen::VectorXd>& losses,
                                     double alpha);

// ---------------------------------------------------------------------------
// portfolio optimization

struct ScenarioMatrix {
    Eigen::MatrixXd returns;  // N x d simulated one-step returns (percent)
    std::uint64_t seed = 0;
    std::string model_id;
};

struct PortfolioConstraints {
    Eigen::VectorXd lower;  // per-asset weight bounds; empty means 0 / 1
    Eigen::VectorXd upper;
};

struct PortfolioWeights {
    Eigen::VectorXd w;  // sums to 1, within bounds
};

// Min-CVaR weights via the linear-programming reformulation (auxiliary zeta
// plus one hinge per scenario), solved through its d+1-row dual with a dense
// bounded simplex. Objective matches the LP optimum to 1e-6 relative.
PortfolioWeights min_cvar_weights(const ScenarioMatrix& scenarios, double alpha,
                                  const PortfolioConstraints& constraints = {});

// ---------------------------------------------------------------------------
// coverage tests

struct KupiecResult {
    double stat = 0.0;
    double pvalue = 1.0;
};

// Unconditional-coverage likelihood ratio with the 0 ln 0 = 0 convention,
// chi-square(1) p-value.
KupiecResult kupiec_uc(int x, int n, double p);

struct ChristoffersenResult {
    double ind_stat = 0.0;
    double ind_pvalue = 1.0;
    double cc_stat = 0.0;  // uc_stat + ind_stat
    double cc_pvalue = 1.0;
};

// First-order Markov independence LR plus the joint conditional-coverage
// statistic at nominal level p.
ChristoffersenResult christoffersen_tests(const std::vector<int>& hits, double p);

// ---------------------------------------------------------------------------
// pipeline

struct RunConfig {
    GeneratorFamily family = GeneratorFamily::gumbel;
    enum class CopulaMode { ac, hac } mode = CopulaMode::hac;
    int n_scenarios = 10000;
    double alpha = 0.95;
    double tail_fraction = 0.10;
    ArmaAparchSpec spec{1, 2, 1, 1};
    int window = 1000;
    int refit_cadence = 10;
    std::uint64_t seed = 0;
    int multistarts = 5;

    void validate() const;
};

// Everything the forecast stage needs, reusable across back-test days and
// serializable as the CLI's model.json.
struct FittedRiskModel {
    RunConfig config;
    std::vector<std::string> tickers;
    std::vector<ArmaAparchFit> fits;              // one per asset
    std::vector<SemiParametricMargin> margins;    // one per asset
    HacModel hac;                                 // mode == hac, d >= 2
    double ac_theta = 1.0;                        // mode == ac
    Eigen::MatrixXd kendall;                      // residual tau matrix
    Eigen::VectorXd mu_next, sigma_next;          // one-step forecasts per asset
    int dimension = 0;
};

FittedRiskModel fit_risk_model(const Eigen::Ref<const Eigen::MatrixXd>& returns,
                               const RunConfig& config,
                               const std::vector<std::string>& tickers = {});

// Copula draw -> margin inversion -> one-step mean/scale map; row i of the
// output consumes substream (seed, i) so results are schedule-independent.
ScenarioMatrix simulate_scenarios(const FittedRiskModel& model, int n, std::uint64_t seed);

struct RiskReport {
    double alpha = 0.95;
    double var = 0.0;
    double cvar = 0.0;
    double cvar_mean_excess = 0.0;
    PortfolioWeights weights;
    std::string copula;  // "hac-gumbel", "clayton", ...
    int n_scenarios = 0;
    std::uint64_t seed = 0;
};

RiskReport assess_scenarios(const ScenarioMatrix& scenarios, double alpha,
                            const PortfolioConstraints& constraints = {});

// The nine-step forecast: fit volatility models, margins and the copula,
// simulate scenarios, optimize weights, report VaR/CVaR of the portfolio
// loss. Stage failures carry a "stage <name>:" prefix.
RiskReport pipeline_forecast(const Eigen::Ref<const Eigen::MatrixXd>& returns,
                             const RunConfig& config,
                             const std::vector<std::string>& tickers = {});

struct BacktestDay {
    int index = 0;          // row of the evaluated day in the input
    double forecast_var = 0.0;
    double realized_return = 0.0;  // portfolio return that day
    int hit = 0;
    bool skipped = false;
};

struct BacktestResult {
    std::vector<int> hits;
    int n = 0;
    int x = 0;
    double rate = 0.0;
    double uc_stat = 0.0, uc_pvalue = 1.0;
    double ind_stat = 0.0, ind_pvalue = 1.0;
    double cc_stat = 0.0, cc_pvalue = 1.0;
    std::vector<BacktestDay> days;
    int skipped_days = 0;
};

// Rolling out-of-sample VaR: refit every refit_cadence days on the trailing
// window, re-filter the volatility state daily, re-optimize weights daily.
BacktestResult rolling_backtest(const Eigen::Ref<const Eigen::MatrixXd>& returns,
                                const RunConfig& config,
                                const std::vector<std::string>& tickers = {});

std::string risk_report_to_json_string(const RiskReport& report,
                                       const std::vector<std::string>& tickers = {});
std::string backtest_to_json_string(const BacktestResult& result, const RunConfig& config);
std::string model_to_json_string(const FittedRiskModel& model);
FittedRiskModel model_from_json_string(const std::string& text);

}  // namespace tailrisk
