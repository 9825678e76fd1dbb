#include "tailrisk/volatility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "tailrisk/optim.hpp"
#include "tailrisk/quadrature.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void ArmaAparchSpec::validate() const {
    if (p < 0 || q < 0 || m < 0 || n < 0)
        throw std::domain_error("spec: orders must be non-negative");
    if (n >= 1 && m < 1) throw std::domain_error("spec: GARCH terms require ARCH terms");
}

void ArmaAparchParams::validate(const ArmaAparchSpec& spec) const {
    spec.validate();
    auto bad = [](bool cond, const char* msg) {
        if (cond) throw std::domain_error(std::string("params: ") + msg);
    };
    bad(ar.size() != spec.p || ma.size() != spec.q, "ar/ma size mismatch");
    bad(alpha.size() != spec.m || gamma.size() != spec.m || beta.size() != spec.n,
        "alpha/gamma/beta size mismatch");
    bad(!std::isfinite(mu), "mu must be finite");
    bad(!(omega > 0.0), "omega must be > 0");
    bad((alpha.array() < 0.0).any(), "alpha must be >= 0");
    bad((gamma.array() <= -1.0).any() || (gamma.array() >= 1.0).any(),
        "gamma must be in (-1,1)");
    bad((beta.array() < 0.0).any(), "beta must be >= 0");
    bad(!(delta > 0.0), "delta must be > 0");
    bad(!(skew > 0.0), "skew must be > 0");
    bad(!(shape > 2.0), "shape must be > 2");
    for (const auto* v : {&ar, &ma})
        bad(!v->allFinite(), "arma coefficients must be finite");
}

Eigen::VectorXd ArmaAparchParams::flatten(const ArmaAparchSpec& spec) const {
    Eigen::VectorXd v(spec.n_params());
    int k = 0;
    v[k++] = mu;
    for (int i = 0; i < spec.p; ++i) v[k++] = ar[i];
    for (int i = 0; i < spec.q; ++i) v[k++] = ma[i];
    v[k++] = omega;
    for (int i = 0; i < spec.m; ++i) v[k++] = alpha[i];
    for (int i = 0; i < spec.m; ++i) v[k++] = gamma[i];
    for (int i = 0; i < spec.n; ++i) v[k++] = beta[i];
    v[k++] = delta;
    v[k++] = skew;
    v[k++] = shape;
    return v;
}

ArmaAparchParams ArmaAparchParams::unflatten(const ArmaAparchSpec& spec,
                                             const Eigen::Ref<const Eigen::VectorXd>& v) {
    ArmaAparchParams p;
    int k = 0;
    p.mu = v[k++];
    p.ar.resize(spec.p);
    for (int i = 0; i < spec.p; ++i) p.ar[i] = v[k++];
    p.ma.resize(spec.q);
    for (int i = 0; i < spec.q; ++i) p.ma[i] = v[k++];
    p.omega = v[k++];
    p.alpha.resize(spec.m);
    for (int i = 0; i < spec.m; ++i) p.alpha[i] = v[k++];
    p.gamma.resize(spec.m);
    for (int i = 0; i < spec.m; ++i) p.gamma[i] = v[k++];
    p.beta.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) p.beta[i] = v[k++];
    p.delta = v[k++];
    p.skew = v[k++];
    p.shape = v[k++];
    return p;
}

std::string ArmaAparchParams::param_name(const ArmaAparchSpec& spec, int i) {
    int k = 0;
    if (i == k++) return "mu";
    for (int j = 1; j <= spec.p; ++j)
        if (i == k++) return "ar" + std::to_string(j);
    for (int j = 1; j <= spec.q; ++j)
        if (i == k++) return "ma" + std::to_string(j);
    if (i == k++) return "omega";
    for (int j = 1; j <= spec.m; ++j)
        if (i == k++) return "alpha" + std::to_string(j);
    for (int j = 1; j <= spec.m; ++j)
        if (i == k++) return "gamma" + std::to_string(j);
    for (int j = 1; j <= spec.n; ++j)
        if (i == k++) return "beta" + std::to_string(j);
    if (i == k++) return "delta";
    if (i == k++) return "skew";
    if (i == k) return "shape";
    throw std::out_of_range("param_name");
}

AparchFilterResult aparch_filter(const ArmaAparchSpec& spec, const ArmaAparchParams& params,
                                 const Eigen::Ref<const Eigen::VectorXd>& returns) {
    params.validate(spec);
    const int t_len = static_cast<int>(returns.size());
    const int warm = std::max(std::max(spec.p, spec.q), std::max(spec.m, spec.n));
    if (t_len <= warm) throw std::invalid_argument("aparch_filter: series too short");
    if (!returns.allFinite())
        throw std::invalid_argument("aparch_filter: non-finite values in returns");

    const double rbar = returns.mean();
    double sigma0_delta = 0.0;
    for (int t = 0; t < t_len; ++t)
        sigma0_delta += std::pow(std::fabs(returns[t] - rbar), params.delta);
    sigma0_delta = std::max(sigma0_delta / t_len, 1e-30);

    AparchFilterResult out;
    out.sigma.resize(t_len);
    out.eps.resize(t_len);
    out.residuals.resize(t_len);
    Eigen::VectorXd sig_delta(t_len);

    for (int t = 0; t < t_len; ++t) {
        double mean = params.mu;
        for (int j = 0; j < spec.p; ++j) {
            double rlag = t - 1 - j >= 0 ? returns[t - 1 - j] : rbar;
            mean += params.ar[j] * rlag;
        }
        for (int k = 0; k < spec.q; ++k) {
            double elag = t - 1 - k >= 0 ? out.eps[t - 1 - k] : 0.0;
            mean += params.ma[k] * elag;
        }
        out.eps[t] = returns[t] - mean;

        double sd = params.omega;
        for (int j = 0; j < spec.m; ++j) {
            double elag = t - 1 - j >= 0 ? out.eps[t - 1 - j] : 0.0;
            double shock = std::fabs(elag) - params.gamma[j] * elag;
            sd += params.alpha[j] * std::pow(shock, params.delta);
        }
        for (int k = 0; k < spec.n; ++k) {
            double slag = t - 1 - k >= 0 ? sig_delta[t - 1 - k] : sigma0_delta;
            sd += params.beta[k] * slag;
        }
        sd = std::min(std::max(sd, 1e-30), 1e30);
        sig_delta[t] = sd;
        out.sigma[t] = std::pow(sd, 1.0 / params.delta);
        out.residuals[t] = out.eps[t] / out.sigma[t];
    }
    return out;
}

namespace {

// E[ z^delta ] over each half of the standardized skew-t; the u-substitution
// z = u/(1-u)^k with k = max(1, 2/(shape-delta)) maps onto [0,inf) and
// flattens the polynomial tail so the adaptive rule converges at the endpoint.
std::pair<double, double> half_power_moments(double delta, const SstdDist& dist) {
    const double shape = dist.shape();
    const double k = std::max(1.0, 2.0 / (shape - delta));
    auto half = [&](bool positive) {
        auto f = [&](double u) {
            double om = 1.0 - u;
            double z = u * std::pow(om, -k);
            // d/du [u (1-u)^-k] = (1-u)^-k (1 + ku/(1-u))
            double jac = std::pow(om, -k) * (1.0 + k * u / om);
            return std::pow(z, delta) * dist.pdf(positive ? z : -z) * jac;
        };
        return integrate(f, 0.0, 1.0 - 1e-13, 1e-10, 2000);
    };
    return {half(true), half(false)};
}

}  // namespace

double stationarity_margin(const ArmaAparchSpec& spec, const ArmaAparchParams& params) {
    params.validate(spec);
    if (params.delta >= params.shape) return kNegInf;  // power moment does not exist
    SstdDist dist(params.skew, params.shape);
    auto [iplus, iminus] = half_power_moments(params.delta, dist);
    double acc = 0.0;
    for (int j = 0; j < spec.m; ++j) {
        double e = std::pow(1.0 - params.gamma[j], params.delta) * iplus +
                   std::pow(1.0 + params.gamma[j], params.delta) * iminus;
        acc += params.alpha[j] * e;
    }
    acc += params.beta.sum();
    return 1.0 - acc;
}

double aparch_loglik(const ArmaAparchSpec& spec, const ArmaAparchParams& params,
                     const Eigen::Ref<const Eigen::VectorXd>& returns) {
    try {
        params.validate(spec);
    } catch (const std::domain_error&) {
        return kNegInf;
    }
    if (params.delta >= params.shape || stationarity_margin(spec, params) <= 0.0) return kNegInf;

    AparchFilterResult f = aparch_filter(spec, params, returns);
    SstdDist dist(params.skew, params.shape);
    double ll = 0.0;
    for (int t = 0; t < f.residuals.size(); ++t)
        ll += dist.log_pdf(f.residuals[t]) - std::log(f.sigma[t]);
    return std::isfinite(ll) ? ll : kNegInf;
}

namespace {

// unconstrained <-> natural transforms for the optimizer
Eigen::VectorXd to_unconstrained(const ArmaAparchSpec& spec, const ArmaAparchParams& p) {
    Eigen::VectorXd v = p.flatten(spec);
    Eigen::VectorXd u(v.size());
    int k = 0;
    auto atanh_clip = [](double x) { return std::atanh(std::clamp(x, -0.999999, 0.999999)); };
    u[k] = v[k];
    ++k;  // mu
    for (int i = 0; i < spec.p + spec.q; ++i, ++k) u[k] = atanh_clip(v[k]);
    u[k] = std::log(v[k]);
    ++k;  // omega
    for (int i = 0; i < spec.m; ++i, ++k) u[k] = std::log(std::max(v[k], 1e-12));  // alpha
    for (int i = 0; i < spec.m; ++i, ++k) u[k] = atanh_clip(v[k]);                 // gamma
    for (int i = 0; i < spec.n; ++i, ++k) u[k] = std::log(std::max(v[k], 1e-12));  // beta
    u[k] = std::log(v[k]);
    ++k;  // delta
    u[k] = std::log(v[k]);
    ++k;  // skew
    u[k] = std::log(v[k] - 2.0);  // shape
    return u;
}

ArmaAparchParams from_unconstrained(const ArmaAparchSpec& spec,
                                    const Eigen::Ref<const Eigen::VectorXd>& u) {
    Eigen::VectorXd v(u.size());
    int k = 0;
    v[k] = u[k];
    ++k;
    for (int i = 0; i < spec.p + spec.q; ++i, ++k) v[k] = std::tanh(u[k]);
    v[k] = std::exp(std::clamp(u[k], -60.0, 30.0));
    ++k;
    for (int i = 0; i < spec.m; ++i, ++k) v[k] = std::exp(std::clamp(u[k], -60.0, 4.0));
    for (int i = 0; i < spec.m; ++i, ++k) v[k] = std::tanh(u[k]);
    for (int i = 0; i < spec.n; ++i, ++k) v[k] = std::exp(std::clamp(u[k], -60.0, 4.0));
    v[k] = std::exp(std::clamp(u[k], -4.0, 2.5));
    ++k;  // delta in [0.018, 12.2]
    v[k] = std::exp(std::clamp(u[k], -2.0, 2.0));
    ++k;  // skew in [0.135, 7.4]
    v[k] = 2.0 + std::exp(std::clamp(u[k], -6.0, 6.0));  // shape in (2, ~405]
    return ArmaAparchParams::unflatten(spec, v);
}

}  // namespace

ArmaAparchFit fit_arma_aparch(const ArmaAparchSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& returns,
                              const FitOptions& options) {
    spec.validate();
    const int t_len = static_cast<int>(returns.size());
    if (t_len < 50) throw std::invalid_argument("fit_arma_aparch: series too short");

    Objective neg_ll = [&](const Eigen::VectorXd& u) {
        double ll = aparch_loglik(spec, from_unconstrained(spec, u), returns);
        return -ll;
    };

    // moment-based center for the starts
    const double rbar = returns.mean();
    ArmaAparchParams base;
    base.mu = rbar;
    base.ar = Eigen::VectorXd::Zero(spec.p);
    base.ma = Eigen::VectorXd::Zero(spec.q);
    base.alpha = Eigen::VectorXd::Constant(spec.m, 0.05);
    base.gamma = Eigen::VectorXd::Constant(spec.m, 0.05);
    base.beta = Eigen::VectorXd::Constant(spec.n, spec.n ? 0.85 / spec.n : 0.0);
    base.delta = 1.5;
    base.skew = 1.0;
    base.shape = 8.0;
    double mdelta = 0.0;
    for (int t = 0; t < t_len; ++t) mdelta += std::pow(std::fabs(returns[t] - rbar), base.delta);
    mdelta /= t_len;
    base.omega = std::max(mdelta * 0.10, 1e-10);

    double best_val = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_u;
    for (int s = 0; s < options.multistarts; ++s) {
        ArmaAparchParams start = base;
        if (s > 0) {
            RngStream rng = substream(options.seed, 0xF17, static_cast<std::uint64_t>(s));
            start.omega *= std::exp(1.2 * (rng.next_uniform() - 0.5));
            start.alpha.setConstant(0.03 + 0.12 * rng.next_uniform());
            if (spec.n) start.beta.setConstant((0.55 + 0.4 * rng.next_uniform()) / spec.n);
            start.delta = 0.8 + 1.4 * rng.next_uniform();
            start.gamma.setConstant(0.6 * (rng.next_uniform() - 0.3));
            if (spec.p) start.ar[0] = 0.8 * (rng.next_uniform() - 0.25);
            if (spec.q) start.ma[0] = 0.8 * (rng.next_uniform() - 0.75);
            start.shape = 4.0 + 8.0 * rng.next_uniform();
        }
        Eigen::VectorXd u0 = to_unconstrained(spec, start);
        if (!std::isfinite(neg_ll(u0))) continue;
        NelderMeadOptions nm;
        nm.max_iter = options.nm_max_iter;
        nm.step = 0.3;
        OptimResult r = nelder_mead(neg_ll, u0, nm);
        if (r.value < best_val) {
            best_val = r.value;
            best_u = r.x;
        }
    }
    if (!best_u.size()) throw std::runtime_error("fit_arma_aparch: no feasible start");

    BfgsOptions bo;
    bo.max_iter = options.bfgs_max_iter;
    OptimResult polish = bfgs_minimize(neg_ll, best_u, bo);
    bool converged = polish.converged || polish.value <= best_val;
    if (polish.value < best_val) {
        best_val = polish.value;
        best_u = polish.x;
    }

    ArmaAparchFit fit;
    fit.spec = spec;
    fit.params = from_unconstrained(spec, best_u);
    fit.returns = returns;
    AparchFilterResult f = aparch_filter(spec, fit.params, returns);
    fit.sigma_path = std::move(f.sigma);
    fit.eps_path = std::move(f.eps);
    fit.residuals = std::move(f.residuals);
    fit.loglik = -best_val;
    const int k = spec.n_params();
    fit.aic_total = -2.0 * fit.loglik + 2.0 * k;
    fit.aic_per_obs = fit.aic_total / t_len;
    fit.converged = converged && std::isfinite(fit.loglik);

    fit.std_errors = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
    if (options.compute_std_errors) {
        // BHHH / outer-product-of-scores information: positive semidefinite by
        // construction, which matters because near-redundant ARMA factors
        // (e.g. ar1 ~ -ma1) make the finite-difference Hessian indefinite.
        Eigen::VectorXd natural = fit.params.flatten(spec);
        auto contributions = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            ArmaAparchParams p = ArmaAparchParams::unflatten(spec, v);
            AparchFilterResult fr = aparch_filter(spec, p, returns);
            SstdDist dist(p.skew, p.shape);
            Eigen::VectorXd lt(t_len);
            for (int t = 0; t < t_len; ++t)
                lt[t] = dist.log_pdf(fr.residuals[t]) - std::log(fr.sigma[t]);
            return lt;
        };
        Eigen::MatrixXd scores(t_len, k);
        bool ok = true;
        for (int i = 0; i < k && ok; ++i) {
            double h = 1e-4 * std::max(std::fabs(natural[i]), 1e-2);
            Eigen::VectorXd vp = natural, vm = natural;
            vp[i] += h;
            vm[i] -= h;
            try {
                scores.col(i) = (contributions(vp) - contributions(vm)) / (2.0 * h);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (ok && scores.allFinite()) {
            Eigen::MatrixXd opg = scores.transpose() * scores;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(opg);
            if (ldlt.info() == Eigen::Success) {
                Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
                for (int i = 0; i < k; ++i)
                    if (cov(i, i) > 0.0) fit.std_errors[i] = std::sqrt(cov(i, i));
            }
        }
    }
    return fit;
}

OneStepForecast forecast_one_step(const ArmaAparchFit& fit) {
    const ArmaAparchSpec& spec = fit.spec;
    const ArmaAparchParams& p = fit.params;
    const int t_len = static_cast<int>(fit.returns.size());

    OneStepForecast fc;
    fc.mu_next = p.mu;
    for (int j = 0; j < spec.p; ++j) fc.mu_next += p.ar[j] * fit.returns[t_len - 1 - j];
    for (int k = 0; k < spec.q; ++k) fc.mu_next += p.ma[k] * fit.eps_path[t_len - 1 - k];

    double sd = p.omega;
    for (int j = 0; j < spec.m; ++j) {
        double e = fit.eps_path[t_len - 1 - j];
        sd += p.alpha[j] * std::pow(std::fabs(e) - p.gamma[j] * e, p.delta);
    }
    for (int k = 0; k < spec.n; ++k)
        sd += p.beta[k] * std::pow(fit.sigma_path[t_len - 1 - k], p.delta);
    fc.sigma_next = std::pow(sd, 1.0 / p.delta);
    return fc;
}

Eigen::VectorXd simulate_arma_aparch(const ArmaAparchSpec& spec, const ArmaAparchParams& params,
                                     int t_len, std::uint64_t seed) {
    params.validate(spec);
    if (t_len < 1) throw std::invalid_argument("simulate: t_len >= 1");
    if (!(stationarity_margin(spec, params) > 0.0))
        throw std::domain_error("simulate: parameters are not second-order stationary");

    const int burn = 500;
    const int total = t_len + burn;
    SstdDist dist(params.skew, params.shape);
    RngStream rng = substream(seed, 0x51Au);

    double ar_sum = params.ar.sum();
    double r0 = std::fabs(1.0 - ar_sum) > 1e-8 ? params.mu / (1.0 - ar_sum) : params.mu;
    double sd0 = params.omega / std::max(1.0 - params.beta.sum(), 0.05);

    Eigen::VectorXd r(total), eps(total), sig_delta(total);
    Eigen::VectorXd out(t_len);
    for (int t = 0; t < total; ++t) {
        double sd = params.omega;
        for (int j = 0; j < spec.m; ++j) {
            double elag = t - 1 - j >= 0 ? eps[t - 1 - j] : 0.0;
            double shock = std::fabs(elag) - params.gamma[j] * elag;
            sd += params.alpha[j] * std::pow(shock, params.delta);
        }
        for (int k = 0; k < spec.n; ++k)
            sd += params.beta[k] * (t - 1 - k >= 0 ? sig_delta[t - 1 - k] : sd0);
        sig_delta[t] = std::min(std::max(sd, 1e-30), 1e30);
        double sigma = std::pow(sig_delta[t], 1.0 / params.delta);

        double z = dist.quantile(rng.next_uniform());
        eps[t] = sigma * z;
        double mean = params.mu;
        for (int j = 0; j < spec.p; ++j) mean += params.ar[j] * (t - 1 - j >= 0 ? r[t - 1 - j] : r0);
        for (int k = 0; k < spec.q; ++k) mean += params.ma[k] * (t - 1 - k >= 0 ? eps[t - 1 - k] : 0.0);
        r[t] = mean + eps[t];
        if (t >= burn) out[t - burn] = r[t];
    }
    return out;
}

std::string fit_to_json_string(const ArmaAparchFit& fit) {
    nlohmann::ordered_json j;
    j["spec"] = {{"p", fit.spec.p}, {"q", fit.spec.q}, {"m", fit.spec.m}, {"n", fit.spec.n}};
    nlohmann::ordered_json pj;
    Eigen::VectorXd v = fit.params.flatten(fit.spec);
    for (int i = 0; i < v.size(); ++i) pj[ArmaAparchParams::param_name(fit.spec, i)] = v[i];
    j["params"] = pj;
    nlohmann::ordered_json se;
    for (int i = 0; i < fit.std_errors.size(); ++i) {
        double s = fit.std_errors[i];
        se[ArmaAparchParams::param_name(fit.spec, i)] =
            std::isfinite(s) ? nlohmann::ordered_json(s) : nlohmann::ordered_json(nullptr);
    }
    j["std_errors"] = se;
    j["loglik"] = fit.loglik;
    j["aic_total"] = fit.aic_total;
    j["aic_per_obs"] = fit.aic_per_obs;
    j["converged"] = fit.converged;
    j["n_obs"] = fit.returns.size();
    return j.dump();
}

}  // namespace tailrisk
