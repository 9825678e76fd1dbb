#include "tailrisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "tailrisk/lp.hpp"
#include "tailrisk/special.hpp"

namespace tailrisk {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

using ojson = nlohmann::ordered_json;

[[noreturn]] void stage_fail(const std::string& stage, const std::exception& e) {
    throw std::runtime_error("stage " + stage + ": " + e.what());
}
}  // namespace

double var_empirical(const Eigen::Ref<const Eigen::VectorXd>& losses, double alpha) {
    const int n = static_cast<int>(losses.size());
    if (n == 0) throw std::invalid_argument("var_empirical: empty input");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("var_empirical: alpha must be in (0,1)");
    if (n < 1.0 / (1.0 - alpha))
        throw std::invalid_argument("var_empirical: need N >= 1/(1-alpha)");
    std::vector<double> s(losses.data(), losses.data() + n);
    int rank = static_cast<int>(std::ceil(alpha * n));  // 1-based
    rank = std::min(std::max(rank, 1), n);
    std::nth_element(s.begin(), s.begin() + (rank - 1), s.end());
    return s[rank - 1];
}

CvarResult cvar_empirical(const Eigen::Ref<const Eigen::VectorXd>& losses, double alpha) {
    CvarResult r;
    const int n = static_cast<int>(losses.size());
    r.var = var_empirical(losses, alpha);
    // Tail membership is decided by rank, not by value comparison: the tail is
    // the top n - ceil(alpha n) order statistics. Absent ties at the VaR this
    // is exactly the set of losses strictly above it, and rank membership is
    // invariant under a constant shift of every scenario.
    std::vector<double> s(losses.data(), losses.data() + n);
    std::sort(s.begin(), s.end());
    int rank = std::min(std::max(static_cast<int>(std::ceil(alpha * n)), 1), n);
    const int tail = n - rank;
    if (tail == 0 || s[n - 1] <= r.var) {
        r.cvar = r.var;
        r.mean_excess = 0.0;
        r.no_exceedance = true;
    } else {
        double acc = 0.0;
        for (int i = rank; i < n; ++i) acc += s[i];
        r.cvar = acc / tail;
        r.mean_excess = r.cvar - r.var;
    }
    return r;
}

double rockafellar_uryasev_objective(const Eigen::Ref<const Eigen::VectorXd>& losses,
                                     double alpha) {
    double zeta = var_empirical(losses, alpha);
    double hinge = (losses.array() - zeta).cwiseMax(0.0).mean();
    return zeta + hinge / (1.0 - alpha);
}

PortfolioWeights min_cvar_weights(const ScenarioMatrix& scenarios, double alpha,
                                  const PortfolioConstraints& constraints) {
    const Eigen::MatrixXd& r = scenarios.returns;
    const int n = static_cast<int>(r.rows());
    const int d = static_cast<int>(r.cols());
    if (n < 2 || d < 1) throw std::invalid_argument("min_cvar_weights: degenerate scenarios");
    if (!r.allFinite()) throw std::invalid_argument("min_cvar_weights: non-finite scenarios");
    if (!(alpha > 0.0 && alpha < 1.0 && n >= 1.0 / (1.0 - alpha)))
        throw std::invalid_argument("min_cvar_weights: need N >= 1/(1-alpha)");

    Eigen::VectorXd lb = constraints.lower.size() ? constraints.lower
                                                  : Eigen::VectorXd::Zero(d);
    Eigen::VectorXd ub =
        constraints.upper.size() ? constraints.upper : Eigen::VectorXd::Ones(d);
    if (lb.size() != d || ub.size() != d)
        throw std::invalid_argument("min_cvar_weights: constraint dimension mismatch");
    if ((lb.array() > ub.array()).any() || lb.sum() > 1.0 + 1e-12 || ub.sum() < 1.0 - 1e-12)
        throw std::invalid_argument("min_cvar_weights: infeasible constraints");

    if (d == 1) {
        PortfolioWeights w;
        w.w = Eigen::VectorXd::Ones(1);
        return w;
    }

    // Dual of the Rockafellar-Uryasev LP after the shift w = lb + v:
    // columns p (N, box [0,kappa]), lambda+-, nu (d), slack s (d);
    // rows: R'p + lambda - nu + s = 0 per asset, sum p = 1.
    const double kappa = 1.0 / ((1.0 - alpha) * n);
    const double s0 = 1.0 - lb.sum();
    const Eigen::VectorXd cap = ub - lb;
    const Eigen::VectorXd shift_cost = r * lb;  // lb' r_i per scenario

    const int ncols = n + 2 + 2 * d;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d + 1, ncols);
    a.block(0, 0, d, n) = r.transpose();
    a.row(d).head(n).setOnes();
    a.col(n).head(d).setOnes();         // lambda+
    a.col(n + 1).head(d) = -Eigen::VectorXd::Ones(d);  // lambda-
    for (int j = 0; j < d; ++j) {
        a(j, n + 2 + j) = -1.0;      // nu_j
        a(j, n + 2 + d + j) = 1.0;   // s_j
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d + 1);
    b[d] = 1.0;
    Eigen::VectorXd c(ncols), lo = Eigen::VectorXd::Zero(ncols),
                    up = Eigen::VectorXd::Constant(ncols, kInf);
    c.head(n) = shift_cost;  // minimizing the negated dual objective
    c[n] = -s0;
    c[n + 1] = s0;
    c.segment(n + 2, d) = cap;
    c.tail(d).setZero();
    up.head(n).setConstant(kappa);

    LpResult lp = solve_lp_bounded(a, b, c, lo, up);
    if (lp.status != LpStatus::optimal)
        throw std::runtime_error("min_cvar_weights: LP did not reach an optimum");

    PortfolioWeights out;
    out.w = lb - lp.row_duals.head(d);  // v_j = -pi_j
    for (int j = 0; j < d; ++j) out.w[j] = std::min(std::max(out.w[j], lb[j]), ub[j]);
    double sum = out.w.sum();
    if (std::fabs(sum - 1.0) > 1e-6)
        throw std::runtime_error("min_cvar_weights: dual recovery lost feasibility");
    out.w /= sum;

    // self-check: the recovered weights must achieve the LP optimum
    double direct = rockafellar_uryasev_objective(-(r * out.w), alpha);
    double lp_opt = -lp.value;
    if (std::fabs(direct - lp_opt) > 1e-6 * (1.0 + std::fabs(lp_opt)))
        throw std::runtime_error("min_cvar_weights: recovered weights miss the LP optimum");
    return out;
}

KupiecResult kupiec_uc(int x, int n, double p) {
    if (x < 0 || n <= 0 || x > n) throw std::invalid_argument("kupiec_uc: need 0 <= x <= n");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("kupiec_uc: p must be in (0,1)");
    auto xlogy = [](double a, double y) { return a == 0.0 ? 0.0 : a * std::log(y); };
    const double rate = static_cast<double>(x) / n;
    double ll0 = xlogy(n - x, 1.0 - p) + xlogy(x, p);
    double ll1 = xlogy(n - x, 1.0 - rate) + xlogy(x, rate);
    KupiecResult r;
    r.stat = std::max(0.0, -2.0 * (ll0 - ll1));
    r.pvalue = chi_square_sf(r.stat, 1);
    return r;
}

ChristoffersenResult christoffersen_tests(const std::vector<int>& hits, double p) {
    const int n = static_cast<int>(hits.size());
    if (n < 2) throw std::invalid_argument("christoffersen_tests: need n >= 2");
    double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    int x = 0;
    for (int t = 0; t < n; ++t) {
        x += hits[t] ? 1 : 0;
        if (t == 0) continue;
        if (hits[t - 1]) {
            (hits[t] ? n11 : n10) += 1;
        } else {
            (hits[t] ? n01 : n00) += 1;
        }
    }
    auto xlogy = [](double a, double y) { return a == 0.0 ? 0.0 : a * std::log(y); };
    const double pi = (n01 + n11) / (n - 1.0);
    const double pi01 = n01 + n00 > 0 ? n01 / (n01 + n00) : 0.0;
    const double pi11 = n10 + n11 > 0 ? n11 / (n10 + n11) : 0.0;
    double ll0 = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
    double ll1 = xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01) + xlogy(n10, 1.0 - pi11) +
                 xlogy(n11, pi11);
    ChristoffersenResult r;
    r.ind_stat = std::max(0.0, -2.0 * (ll0 - ll1));
    r.ind_pvalue = chi_square_sf(r.ind_stat, 1);
    r.cc_stat = r.ind_stat + kupiec_uc(x, n, p).stat;
    r.cc_pvalue = chi_square_sf(r.cc_stat, 2);
    return r;
}

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    spec.validate();
    if (!(alpha > 0.5 && alpha < 1.0))
        throw std::invalid_argument("config: alpha must be in (0.5, 1)");
    if (n_scenarios < 1000) throw std::invalid_argument("config: n_scenarios must be >= 1000");
    if (!(tail_fraction > 0.0 && tail_fraction < 0.5))
        throw std::invalid_argument("config: tail_fraction must be in (0, 0.5)");
    if (window < 300) throw std::invalid_argument("config: window must be >= 300");
    if (refit_cadence < 1) throw std::invalid_argument("config: refit_cadence must be >= 1");
    if (multistarts < 1) throw std::invalid_argument("config: multistarts must be >= 1");
}

FittedRiskModel fit_risk_model(const Eigen::Ref<const Eigen::MatrixXd>& returns,
                               const RunConfig& config, const std::vector<std::string>& tickers) {
    config.validate();
    const int t_len = static_cast<int>(returns.rows());
    const int d = static_cast<int>(returns.cols());
    if (d < 1) throw std::invalid_argument("fit_risk_model: no assets");
    if (!tickers.empty() && static_cast<int>(tickers.size()) != d)
        throw std::invalid_argument("fit_risk_model: ticker count mismatch");

    FittedRiskModel model;
    model.config = config;
    model.tickers = tickers;
    model.dimension = d;

    // volatility fits, independent across assets
    try {
        FitOptions opt;
        opt.multistarts = config.multistarts;
        std::vector<std::future<ArmaAparchFit>> futs;
        for (int j = 0; j < d; ++j) {
            FitOptions o = opt;
            o.seed = mix_u64(config.seed ^ (0xA55E7ull + j));
            Eigen::VectorXd col = returns.col(j);
            futs.push_back(std::async(std::launch::async, [spec = config.spec, col, o] {
                return fit_arma_aparch(spec, col, o);
            }));
        }
        for (auto& f : futs) model.fits.push_back(f.get());
    } catch (const std::exception& e) {
        stage_fail("volatility-fit", e);
    }
    (void)t_len;

    // semi-parametric margins on the standardized residuals
    Eigen::MatrixXd uniforms(returns.rows(), d);
    try {
        for (int j = 0; j < d; ++j) {
            model.margins.push_back(fit_margin(model.fits[j].residuals, config.tail_fraction));
            for (int t = 0; t < returns.rows(); ++t)
                uniforms(t, j) = margin_cdf(model.margins[j], model.fits[j].residuals[t]);
        }
    } catch (const std::exception& e) {
        stage_fail("margins", e);
    }

    // dependence structure
    try {
        if (d >= 2) {
            model.kendall = empirical_kendall_matrix(uniforms);
            if (config.mode == RunConfig::CopulaMode::hac) {
                model.hac = estimate_structure(model.kendall, config.family);
            } else {
                double acc = 0.0;
                for (int i = 0; i < d; ++i)
                    for (int j = i + 1; j < d; ++j) acc += model.kendall(i, j);
                double avg = acc / (0.5 * d * (d - 1));
                model.ac_theta = theta_from_tau(config.family, std::max(avg, 1e-6));
            }
        }
    } catch (const std::exception& e) {
        stage_fail("copula", e);
    }

    model.mu_next.resize(d);
    model.sigma_next.resize(d);
    for (int j = 0; j < d; ++j) {
        OneStepForecast fc = forecast_one_step(model.fits[j]);
        model.mu_next[j] = fc.mu_next;
        model.sigma_next[j] = fc.sigma_next;
    }
    return model;
}

ScenarioMatrix simulate_scenarios(const FittedRiskModel& model, int n, std::uint64_t seed) {
    const int d = model.dimension;
    if (n < 1) throw std::invalid_argument("simulate_scenarios: n >= 1 required");

    ScenarioMatrix out;
    out.seed = seed;
    try {
        Eigen::MatrixXd u;
        if (d == 1) {
            u.resize(n, 1);
            for (int i = 0; i < n; ++i)
                u(i, 0) = substream(seed, 0x1D1A, static_cast<std::uint64_t>(i)).next_uniform();
        } else if (model.config.mode == RunConfig::CopulaMode::hac) {
            u = sample_hac(model.hac, n, seed).values;
            out.model_id = "hac-" + std::string(family_name(model.config.family));
        } else {
            u = sample_ac({model.config.family, model.ac_theta}, d, n, seed).values;
            out.model_id = family_name(model.config.family);
        }
        if (d == 1) out.model_id = "univariate";

        out.returns.resize(n, d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < n; ++i) {
                double z = margin_quantile(model.margins[j], u(i, j));
                out.returns(i, j) = model.mu_next[j] + model.sigma_next[j] * z;
            }
    } catch (const std::exception& e) {
        stage_fail("scenario-simulation", e);
    }
    return out;
}

RiskReport assess_scenarios(const ScenarioMatrix& scenarios, double alpha,
                            const PortfolioConstraints& constraints) {
    RiskReport rep;
    rep.alpha = alpha;
    rep.n_scenarios = static_cast<int>(scenarios.returns.rows());
    rep.seed = scenarios.seed;
    rep.copula = scenarios.model_id;
    try {
        rep.weights = min_cvar_weights(scenarios, alpha, constraints);
    } catch (const std::exception& e) {
        stage_fail("weight-optimization", e);
    }
    Eigen::VectorXd losses = -(scenarios.returns * rep.weights.w);
    CvarResult cv = cvar_empirical(losses, alpha);
    rep.var = cv.var;
    rep.cvar = cv.cvar;
    rep.cvar_mean_excess = cv.mean_excess;
    return rep;
}

RiskReport pipeline_forecast(const Eigen::Ref<const Eigen::MatrixXd>& returns,
                             const RunConfig& config, const std::vector<std::string>& tickers) {
    FittedRiskModel model = fit_risk_model(returns, config, tickers);
    ScenarioMatrix sc = simulate_scenarios(model, config.n_scenarios, config.seed);
    return assess_scenarios(sc, config.alpha);
}

BacktestResult rolling_backtest(const Eigen::Ref<const Eigen::MatrixXd>& returns,
                                const RunConfig& config, const std::vector<std::string>& tickers) {
    config.validate();
    const int t_len = static_cast<int>(returns.rows());
    const int d = static_cast<int>(returns.cols());
    if (t_len < config.window + 100)
        throw std::invalid_argument("rolling_backtest: need at least window + 100 observations");

    BacktestResult res;
    FittedRiskModel model;
    bool have_model = false;

    for (int t = config.window; t < t_len; ++t) {
        BacktestDay day;
        day.index = t;
        const int start = t - config.window;
        try {
            if (!have_model || (t - config.window) % config.refit_cadence == 0) {
                model = fit_risk_model(returns.middleRows(start, config.window), config, tickers);
                have_model = true;
            } else {
                // keep parameters, margins and copula; refresh the filtered
                // state on the current window
                for (int j = 0; j < d; ++j) {
                    ArmaAparchFit& fit = model.fits[j];
                    fit.returns = returns.col(j).segment(start, config.window);
                    AparchFilterResult f =
                        aparch_filter(fit.spec, fit.params, fit.returns);
                    fit.sigma_path = std::move(f.sigma);
                    fit.eps_path = std::move(f.eps);
                    fit.residuals = std::move(f.residuals);
                    OneStepForecast fc = forecast_one_step(fit);
                    model.mu_next[j] = fc.mu_next;
                    model.sigma_next[j] = fc.sigma_next;
                }
            }
            std::uint64_t day_seed = mix_u64(config.seed ^ (0xBAC7000ull + t));
            ScenarioMatrix sc = simulate_scenarios(model, config.n_scenarios, day_seed);
            RiskReport rep = assess_scenarios(sc, config.alpha);
            day.forecast_var = rep.var;
            day.realized_return = returns.row(t) * rep.weights.w;
            day.hit = -day.realized_return > rep.var ? 1 : 0;
            res.hits.push_back(day.hit);
        } catch (const std::exception&) {
            day.skipped = true;
            ++res.skipped_days;
            have_model = false;  // force a refit on the next day
        }
        res.days.push_back(day);
    }

    res.n = static_cast<int>(res.hits.size());
    res.x = 0;
    for (int h : res.hits) res.x += h;
    res.rate = res.n ? static_cast<double>(res.x) / res.n : 0.0;
    if (res.n >= 2) {
        KupiecResult uc = kupiec_uc(res.x, res.n, 1.0 - config.alpha);
        res.uc_stat = uc.stat;
        res.uc_pvalue = uc.pvalue;
        ChristoffersenResult cc = christoffersen_tests(res.hits, 1.0 - config.alpha);
        res.ind_stat = cc.ind_stat;
        res.ind_pvalue = cc.ind_pvalue;
        res.cc_stat = cc.cc_stat;
        res.cc_pvalue = cc.cc_pvalue;
    }
    return res;
}

// ---------------------------------------------------------------------------
// serialization

std::string risk_report_to_json_string(const RiskReport& report,
                                       const std::vector<std::string>& tickers) {
    ojson j;
    j["alpha"] = report.alpha;
    j["var"] = report.var;
    j["cvar"] = report.cvar;
    j["cvar_mean_excess"] = report.cvar_mean_excess;
    j["weights"] = std::vector<double>(report.weights.w.data(),
                                       report.weights.w.data() + report.weights.w.size());
    if (!tickers.empty()) j["tickers"] = tickers;
    j["copula"] = report.copula;
    j["n_scenarios"] = report.n_scenarios;
    j["seed"] = report.seed;
    return j.dump();
}

std::string backtest_to_json_string(const BacktestResult& result, const RunConfig& config) {
    ojson j;
    j["alpha"] = config.alpha;
    j["n"] = result.n;
    j["x"] = result.x;
    j["exceedance_rate"] = result.rate;
    j["uc_stat"] = result.uc_stat;
    j["uc_pvalue"] = result.uc_pvalue;
    j["ind_stat"] = result.ind_stat;
    j["ind_pvalue"] = result.ind_pvalue;
    j["cc_stat"] = result.cc_stat;
    j["cc_pvalue"] = result.cc_pvalue;
    j["skipped_days"] = result.skipped_days;
    j["window"] = config.window;
    j["refit_cadence"] = config.refit_cadence;
    j["n_scenarios"] = config.n_scenarios;
    j["seed"] = config.seed;
    return j.dump();
}

namespace {

ojson config_to_json(const RunConfig& c) {
    ojson j;
    j["family"] = family_name(c.family);
    j["mode"] = c.mode == RunConfig::CopulaMode::hac ? "hac" : "ac";
    j["n_scenarios"] = c.n_scenarios;
    j["alpha"] = c.alpha;
    j["tail_fraction"] = c.tail_fraction;
    j["spec"] = {{"p", c.spec.p}, {"q", c.spec.q}, {"m", c.spec.m}, {"n", c.spec.n}};
    j["window"] = c.window;
    j["refit_cadence"] = c.refit_cadence;
    j["seed"] = c.seed;
    j["multistarts"] = c.multistarts;
    return j;
}

RunConfig config_from_json(const ojson& j) {
    RunConfig c;
    c.family = family_from_name(j.at("family").get<std::string>());
    c.mode = j.at("mode").get<std::string>() == "hac" ? RunConfig::CopulaMode::hac
                                                      : RunConfig::CopulaMode::ac;
    c.n_scenarios = j.at("n_scenarios").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.tail_fraction = j.at("tail_fraction").get<double>();
    c.spec.p = j.at("spec").at("p").get<int>();
    c.spec.q = j.at("spec").at("q").get<int>();
    c.spec.m = j.at("spec").at("m").get<int>();
    c.spec.n = j.at("spec").at("n").get<int>();
    c.window = j.at("window").get<int>();
    c.refit_cadence = j.at("refit_cadence").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.multistarts = j.at("multistarts").get<int>();
    return c;
}

}  // namespace

std::string model_to_json_string(const FittedRiskModel& model) {
    ojson j;
    j["config"] = config_to_json(model.config);
    j["dimension"] = model.dimension;
    if (!model.tickers.empty()) j["tickers"] = model.tickers;
    ojson assets = ojson::array();
    for (int k = 0; k < model.dimension; ++k) {
        ojson aj;
        aj["fit"] = ojson::parse(fit_to_json_string(model.fits[k]));
        aj["margin"] = ojson::parse(margin_to_json_string(model.margins[k]));
        aj["mu_next"] = model.mu_next[k];
        aj["sigma_next"] = model.sigma_next[k];
        assets.push_back(std::move(aj));
    }
    j["assets"] = std::move(assets);
    if (model.dimension >= 2) {
        if (model.config.mode == RunConfig::CopulaMode::hac)
            j["copula"] = ojson::parse(hac_to_json_string(model.hac));
        else
            j["copula"] = ojson{{"family", family_name(model.config.family)},
                                {"theta", model.ac_theta}};
        ojson kj = ojson::array();
        for (int i = 0; i < model.kendall.rows(); ++i) {
            std::vector<double> row(model.kendall.row(i).begin(), model.kendall.row(i).end());
            kj.push_back(row);
        }
        j["kendall"] = std::move(kj);
    }
    return j.dump(2);
}

FittedRiskModel model_from_json_string(const std::string& text) {
    ojson j = ojson::parse(text);
    FittedRiskModel m;
    m.config = config_from_json(j.at("config"));
    m.dimension = j.at("dimension").get<int>();
    if (j.contains("tickers")) m.tickers = j.at("tickers").get<std::vector<std::string>>();
    m.mu_next.resize(m.dimension);
    m.sigma_next.resize(m.dimension);
    for (int k = 0; k < m.dimension; ++k) {
        const ojson& aj = j.at("assets").at(k);
        m.margins.push_back(margin_from_json_string(aj.at("margin").dump()));
        m.mu_next[k] = aj.at("mu_next").get<double>();
        m.sigma_next[k] = aj.at("sigma_next").get<double>();
    }
    if (m.dimension >= 2) {
        if (m.config.mode == RunConfig::CopulaMode::hac)
            m.hac = hac_from_json_string(j.at("copula").dump());
        else
            m.ac_theta = j.at("copula").at("theta").get<double>();
    }
    return m;
}

}  // namespace tailrisk
