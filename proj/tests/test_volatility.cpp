#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tailrisk/optim.hpp"
#include "tailrisk/quadrature.hpp"
#include "tailrisk/rng.hpp"
#include "tailrisk/sstd.hpp"
#include "tailrisk/volatility.hpp"

using namespace tailrisk;

namespace {

// independent one-lag variance recursions, same initialization convention
// (presample eps = 0, presample sigma^2 from the sample)
Eigen::VectorXd garch_ref(double omega, double a, double b,
                          const Eigen::VectorXd& eps, double s0sq) {
    Eigen::VectorXd s2(eps.size());
    for (int t = 0; t < eps.size(); ++t) {
        double el = t > 0 ? eps[t - 1] : 0.0;
        double sl = t > 0 ? s2[t - 1] : s0sq;
        s2[t] = omega + a * el * el + b * sl;
    }
    return s2;
}

Eigen::VectorXd gjr_ref(double omega, double a, double g, double b,
                        const Eigen::VectorXd& eps, double s0sq) {
    Eigen::VectorXd s2(eps.size());
    for (int t = 0; t < eps.size(); ++t) {
        double el = t > 0 ? eps[t - 1] : 0.0;
        double sl = t > 0 ? s2[t - 1] : s0sq;
        s2[t] = omega + a * el * el + g * el * el * (el < 0.0 ? 1.0 : 0.0) + b * sl;
    }
    return s2;
}

Eigen::VectorXd tgarch_ref(double omega, double ap, double am,
                           const Eigen::VectorXd& eps) {
    Eigen::VectorXd s(eps.size());
    for (int t = 0; t < eps.size(); ++t) {
        double el = t > 0 ? eps[t - 1] : 0.0;
        s[t] = omega + ap * std::max(el, 0.0) + am * std::max(-el, 0.0);
    }
    return s;
}

ArmaAparchParams pure_variance_params(double omega, double alpha, double gamma, double beta,
                                      double delta) {
    ArmaAparchParams p;
    p.mu = 0.0;
    p.ar.resize(0);
    p.ma.resize(0);
    p.omega = omega;
    p.alpha = Eigen::VectorXd::Constant(1, alpha);
    p.gamma = Eigen::VectorXd::Constant(1, gamma);
    p.beta = beta >= 0.0 ? Eigen::VectorXd::Constant(1, beta) : Eigen::VectorXd();
    p.delta = delta;
    p.skew = 1.0;
    p.shape = 8.0;
    return p;
}

ArmaAparchParams table3_like_params() {
    ArmaAparchParams p;
    p.mu = 0.11;
    p.ar = Eigen::VectorXd::Constant(1, 0.90);
    p.ma.resize(2);
    p.ma << -0.95, 0.03;
    p.omega = 0.08;  // percent-return scale: unconditional sigma ~ 1.2
    p.alpha = Eigen::VectorXd::Constant(1, 0.11);
    p.gamma = Eigen::VectorXd::Constant(1, 0.91);
    p.beta = Eigen::VectorXd::Constant(1, 0.85);
    p.delta = 0.92;
    p.skew = 1.09;
    p.shape = 6.4;
    return p;
}

}  // namespace

namespace {

// E[z^r; z>0] (or the mirrored half) with the tail mapped through
// z = u/(1-u)^k so heavy polynomial tails integrate to machine accuracy
double half_moment(const SstdDist& d, int r, bool positive) {
    double k = std::max(1.0, 2.0 / (d.shape() - r));
    auto f = [&](double u) {
        double om = 1.0 - u;
        double z = u * std::pow(om, -k);
        double jac = std::pow(om, -k) * (1.0 + k * u / om);
        return std::pow(z, r) * d.pdf(positive ? z : -z) * jac;
    };
    return integrate(f, 0.0, 1.0 - 1e-13, 1e-11, 4000);
}

}  // namespace

TEST_CASE("sstd: symmetry, standardization, quantile-cdf identity") {
    CHECK(sstd_cdf(0.0, 1.0, 8.0) == doctest::Approx(0.5).epsilon(1e-12));

    for (double skew : {0.8, 1.0, 1.09, 1.5})
        for (double shape : {3.0, 6.4, 8.0, 25.0}) {
            SstdDist d(skew, shape);
            double mass = half_moment(d, 0, true) + half_moment(d, 0, false);
            double mean = half_moment(d, 1, true) - half_moment(d, 1, false);
            double var = half_moment(d, 2, true) + half_moment(d, 2, false);
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(std::fabs(mean) < 1e-6);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
            for (double u : {0.001, 0.025, 0.3, 0.5, 0.9, 0.999})
                CHECK(d.cdf(d.quantile(u)) == doctest::Approx(u).epsilon(1e-10));
        }

    // Gaussian limit
    CHECK(sstd_quantile(0.975, 1.0, 2e6) == doctest::Approx(1.959964).epsilon(0.005));
    CHECK_THROWS_AS(sstd_density(0.0, -1.0, 8.0), std::domain_error);
    CHECK_THROWS_AS(sstd_density(0.0, 1.0, 2.0), std::domain_error);
    CHECK_THROWS_AS(sstd_quantile(0.0, 1.0, 8.0), std::domain_error);
}

TEST_CASE("aparch_filter: degenerate, ARCH hand check, special-case recursions") {
    ArmaAparchSpec pv{0, 0, 1, 1};

    // all alpha, beta, gamma zero -> constant scale omega^(1/delta)
    {
        ArmaAparchSpec s0{0, 0, 1, 0};
        ArmaAparchParams p = pure_variance_params(0.5, 0.0, 0.0, -1.0, 1.3);
        Eigen::VectorXd r(5);
        r << 0.3, -0.2, 0.5, -0.1, 0.0;
        auto f = aparch_filter(s0, p, r);
        for (int t = 0; t < 5; ++t)
            CHECK(f.sigma[t] == doctest::Approx(std::pow(0.5, 1.0 / 1.3)).epsilon(1e-14));
    }

    // ARCH: delta=2, gamma=0, beta=0; sigma_t^2 = omega + a eps_{t-1}^2 by hand
    {
        ArmaAparchSpec s0{0, 0, 1, 0};
        ArmaAparchParams p = pure_variance_params(0.2, 0.3, 0.0, -1.0, 2.0);
        Eigen::VectorXd r(5);
        r << 1.0, -2.0, 0.5, 0.0, 3.0;
        auto f = aparch_filter(s0, p, r);
        CHECK(f.sigma[1] == doctest::Approx(std::sqrt(0.2 + 0.3 * 1.0)).epsilon(1e-14));
        CHECK(f.sigma[2] == doctest::Approx(std::sqrt(0.2 + 0.3 * 4.0)).epsilon(1e-14));
        CHECK(f.sigma[4] == doctest::Approx(std::sqrt(0.2 + 0.3 * 0.0)).epsilon(1e-14));
    }

    RngStream rng(31);
    Eigen::VectorXd eps(400);
    for (int i = 0; i < 400; ++i) eps[i] = 1.3 * rng.next_gaussian();
    double rbar = eps.mean();
    double s0sq = (eps.array() - rbar).square().mean();

    // GARCH collapse (delta=2, gamma=0)
    {
        ArmaAparchParams p = pure_variance_params(0.1, 0.08, 0.0, 0.85, 2.0);
        auto f = aparch_filter(pv, p, eps);
        // the filter's eps differ from raw returns by the sample mean (mu=0)
        Eigen::VectorXd s2 = garch_ref(0.1, 0.08, 0.85, f.eps, s0sq);
        for (int t = 0; t < eps.size(); ++t)
            CHECK(std::fabs(f.sigma[t] * f.sigma[t] - s2[t]) < 1e-10);
    }
    // GJR collapse (delta=2): alpha(|e|-g e)^2 = a(1-g)^2 e^2 + 4 a g e^2 1{e<0}
    {
        double a = 0.05, g = 0.4, b = 0.8;
        ArmaAparchParams p = pure_variance_params(0.1, a, g, b, 2.0);
        auto f = aparch_filter(pv, p, eps);
        Eigen::VectorXd s2 = gjr_ref(0.1, a * (1 - g) * (1 - g), 4 * a * g, b, f.eps, s0sq);
        for (int t = 0; t < eps.size(); ++t)
            CHECK(std::fabs(f.sigma[t] * f.sigma[t] - s2[t]) < 1e-10);
    }
    // T-GARCH collapse (delta=1, beta=0)
    {
        ArmaAparchSpec s0{0, 0, 1, 0};
        double a = 0.3, g = 0.5;
        ArmaAparchParams p = pure_variance_params(0.7, a, g, -1.0, 1.0);
        auto f = aparch_filter(s0, p, eps);
        Eigen::VectorXd s = tgarch_ref(0.7, a * (1 - g), a * (1 + g), f.eps);
        for (int t = 0; t < eps.size(); ++t) CHECK(std::fabs(f.sigma[t] - s[t]) < 1e-10);
    }

    Eigen::VectorXd bad(5);
    bad << 1.0, std::nan(""), 0.0, 0.0, 0.0;
    CHECK_THROWS_AS(aparch_filter(pv, pure_variance_params(0.1, 0.05, 0.0, 0.8, 2.0), bad),
                    std::invalid_argument);
}

TEST_CASE("stationarity margin closed-form cases") {
    ArmaAparchSpec pv{0, 0, 1, 1};
    {
        ArmaAparchParams p = pure_variance_params(0.1, 0.0, 0.0, 0.0, 1.7);
        CHECK(stationarity_margin(pv, p) == doctest::Approx(1.0).epsilon(1e-9));
    }
    {
        ArmaAparchParams p = pure_variance_params(0.1, 0.07, 0.0, 0.9, 2.0);
        p.shape = 5e6;  // Gaussian limit: E Z^2 = 1
        CHECK(stationarity_margin(pv, p) == doctest::Approx(1.0 - 0.07 - 0.9).epsilon(1e-5));
    }
    {
        ArmaAparchParams p = pure_variance_params(0.1, 0.2, 0.0, 0.5, 1.0);
        p.shape = 5e6;  // E|Z| = sqrt(2/pi)
        double expect = 1.0 - 0.2 * std::sqrt(2.0 / M_PI) - 0.5;
        CHECK(stationarity_margin(pv, p) == doctest::Approx(expect).epsilon(1e-5));
    }
    // paper-scale parameters are comfortably stationary
    CHECK(stationarity_margin({1, 2, 1, 1}, table3_like_params()) > 0.0);
}

TEST_CASE("loglik: Gaussian-limit closed form, shift invariance, sentinel") {
    ArmaAparchSpec s0{0, 0, 1, 0};
    RngStream rng(7);
    Eigen::VectorXd r(100);
    for (int i = 0; i < 100; ++i) r[i] = 0.7 * rng.next_gaussian();

    ArmaAparchParams p = pure_variance_params(0.49, 0.0, 0.0, -1.0, 2.0);
    p.shape = 1e9;
    double ll = aparch_loglik(s0, p, r);
    double sigma = 0.7;
    double hand = 0.0;
    for (int i = 0; i < 100; ++i)
        hand += -0.5 * std::log(2.0 * M_PI) - 0.5 * r[i] * r[i] / (sigma * sigma) -
                std::log(sigma);
    CHECK(ll == doctest::Approx(hand).epsilon(1e-6));

    // location-shift reparametrization
    ArmaAparchSpec pv{0, 0, 1, 1};
    ArmaAparchParams q = pure_variance_params(0.3, 0.1, 0.2, 0.6, 1.5);
    Eigen::VectorXd shifted = r.array() + 1.37;
    ArmaAparchParams q2 = q;
    q2.mu = q.mu + 1.37;
    CHECK(aparch_loglik(pv, q, r) == doctest::Approx(aparch_loglik(pv, q2, shifted)).epsilon(1e-12));

    // constraint violations give the -inf sentinel, never a throw
    ArmaAparchParams badp = q;
    badp.omega = -1.0;
    CHECK(aparch_loglik(pv, badp, r) == -std::numeric_limits<double>::infinity());
    ArmaAparchParams ns = q;
    ns.beta.setConstant(1.2);
    CHECK(aparch_loglik(pv, ns, r) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("loglik is maximized near the truth against an omega perturbation") {
    ArmaAparchSpec spec{1, 2, 1, 1};
    ArmaAparchParams truth = table3_like_params();
    int wins = 0;
    const int reps = 40;
    for (int s = 0; s < reps; ++s) {
        Eigen::VectorXd r = simulate_arma_aparch(spec, truth, 10000, 100 + s);
        ArmaAparchParams pert = truth;
        pert.omega *= 1.10;
        if (aparch_loglik(spec, truth, r) >= aparch_loglik(spec, pert, r)) ++wins;
    }
    CHECK(wins >= static_cast<int>(0.95 * reps));
}

TEST_CASE("gradient consistency: central differences at two step sizes") {
    ArmaAparchSpec spec{1, 1, 1, 1};
    ArmaAparchParams base;
    base.mu = 0.05;
    base.ar = Eigen::VectorXd::Constant(1, 0.3);
    base.ma = Eigen::VectorXd::Constant(1, -0.2);
    base.omega = 0.05;
    base.alpha = Eigen::VectorXd::Constant(1, 0.08);
    base.gamma = Eigen::VectorXd::Constant(1, 0.3);
    base.beta = Eigen::VectorXd::Constant(1, 0.8);
    base.delta = 1.4;
    base.skew = 1.05;
    base.shape = 7.0;
    Eigen::VectorXd r = simulate_arma_aparch(spec, base, 2000, 5);

    RngStream rng(17);
    int checked = 0;
    for (int rep = 0; rep < 40 && checked < 20; ++rep) {
        Eigen::VectorXd v = base.flatten(spec);
        for (int i = 0; i < v.size(); ++i) v[i] *= 1.0 + 0.05 * (rng.next_uniform() - 0.5);
        ArmaAparchParams p = ArmaAparchParams::unflatten(spec, v);
        if (!(aparch_loglik(spec, p, r) > -1e30)) continue;
        ++checked;
        auto obj = [&](const Eigen::VectorXd& x) {
            return aparch_loglik(spec, ArmaAparchParams::unflatten(spec, x), r);
        };
        Eigen::VectorXd g1 = fd_gradient(obj, v, 1e-5);
        Eigen::VectorXd g2 = fd_gradient(obj, v, 3e-6);
        for (int i = 0; i < v.size(); ++i) {
            double scale = std::max({std::fabs(g1[i]), std::fabs(g2[i]), 1.0});
            CHECK(std::fabs(g1[i] - g2[i]) / scale < 1e-4);
        }
    }
    CHECK(checked == 20);
}

TEST_CASE("simulate: leverage impulse, fat tails, iid collapse") {
    ArmaAparchSpec pv{0, 0, 1, 1};

    // gamma > 0: a negative shock raises next-step sigma more (exact from the recursion)
    {
        ArmaAparchParams p = pure_variance_params(0.1, 0.1, 0.5, 0.5, 1.2);
        Eigen::VectorXd up(3), dn(3);
        up << 0.0, 2.0, 0.0;
        dn << 0.0, -2.0, 0.0;
        ArmaAparchSpec s{0, 0, 1, 1};
        auto fu = aparch_filter(s, p, up);
        auto fd = aparch_filter(s, p, dn);
        // shock enters at t=1 (after mean adjustment), response read at t=2
        CHECK(fd.sigma[2] > fu.sigma[2]);
    }

    // volatility clustering fattens tails relative to the innovation law
    {
        ArmaAparchParams p = pure_variance_params(0.05, 0.12, 0.2, 0.82, 2.0);
        p.shape = 6.0;
        Eigen::VectorXd r = simulate_arma_aparch(pv, p, 60000, 42);
        auto kurt = [](const Eigen::VectorXd& x) {
            double m = x.mean();
            double s2 = (x.array() - m).square().mean();
            return (x.array() - m).pow(4).mean() / (s2 * s2);
        };
        SstdDist innov(1.0, 6.0);
        RngStream rng(43);
        Eigen::VectorXd z(60000);
        for (int i = 0; i < z.size(); ++i) z[i] = innov.quantile(rng.next_uniform());
        CHECK(kurt(r) > kurt(z));
    }

    // alpha = beta = 0 reproduces iid sstd * omega^(1/delta)
    {
        ArmaAparchSpec s0{0, 0, 1, 0};
        ArmaAparchParams p = pure_variance_params(0.6, 0.0, 0.0, -1.0, 1.7);
        p.skew = 1.2;
        p.shape = 5.0;
        Eigen::VectorXd r = simulate_arma_aparch(s0, p, 20000, 9);
        double scale = std::pow(0.6, 1.0 / 1.7);
        SstdDist d(1.2, 5.0);
        std::vector<double> u(r.size());
        for (int i = 0; i < r.size(); ++i) u[i] = d.cdf(r[i] / scale);
        CHECK(oracles::ks_uniform(u) < oracles::ks_crit_1pct(u.size()));
    }

    ArmaAparchParams exploded = pure_variance_params(0.1, 0.3, 0.0, 0.9, 2.0);
    CHECK_THROWS_AS(simulate_arma_aparch(pv, exploded, 100, 1), std::domain_error);
}

TEST_CASE("filter/simulator consistency and one-step forecast oracle") {
    ArmaAparchSpec spec{1, 2, 1, 1};
    ArmaAparchParams p = table3_like_params();
    const int t_len = 1500;
    Eigen::VectorXd r = simulate_arma_aparch(spec, p, t_len + 1, 77);

    // forecast from the first T points equals the filter state at T+1
    ArmaAparchFit fit;
    fit.spec = spec;
    fit.params = p;
    fit.returns = r.head(t_len);
    auto f = aparch_filter(spec, p, r.head(t_len));
    fit.sigma_path = f.sigma;
    fit.eps_path = f.eps;
    fit.residuals = f.residuals;
    auto fc = forecast_one_step(fit);

    auto f_full = aparch_filter(spec, p, r);
    // the mean recursions share all lags; transient from initialization has died out
    double eps_next = r[t_len] - fc.mu_next;
    CHECK(std::fabs(f_full.eps[t_len] - eps_next) < 1e-9);
    CHECK(fc.sigma_next == doctest::Approx(f_full.sigma[t_len]).epsilon(1e-9));

    // degenerate forecasts
    ArmaAparchSpec s0{0, 0, 1, 0};
    ArmaAparchParams q = pure_variance_params(0.5, 0.0, 0.0, -1.0, 1.3);
    q.mu = 0.2;
    Eigen::VectorXd rr(600);
    RngStream rng(3);
    for (int i = 0; i < 600; ++i) rr[i] = 0.2 + rng.next_gaussian();
    ArmaAparchFit fit0;
    fit0.spec = s0;
    fit0.params = q;
    fit0.returns = rr;
    auto f0 = aparch_filter(s0, q, rr);
    fit0.sigma_path = f0.sigma;
    fit0.eps_path = f0.eps;
    fit0.residuals = f0.residuals;
    auto fc0 = forecast_one_step(fit0);
    CHECK(fc0.mu_next == doctest::Approx(0.2));
    CHECK(fc0.sigma_next == doctest::Approx(std::pow(0.5, 1.0 / 1.3)).epsilon(1e-12));
}

TEST_CASE("fit: recovery on simulated data, white-noise degeneracy, refit stability") {
    ArmaAparchSpec spec{1, 2, 1, 1};
    ArmaAparchParams truth = table3_like_params();
    Eigen::VectorXd r = simulate_arma_aparch(spec, truth, 10000, 2026);

    FitOptions opt;
    opt.multistarts = 3;
    ArmaAparchFit fit = fit_arma_aparch(spec, r, opt);
    CHECK(fit.converged);
    CHECK(fit.residuals.mean() == doctest::Approx(0.0).epsilon(0.1));
    double resvar = (fit.residuals.array() - fit.residuals.mean()).square().mean();
    CHECK(resvar == doctest::Approx(1.0).epsilon(0.1));
    CHECK((fit.sigma_path.array() > 0.0).all());
    CHECK(fit.aic_per_obs > 0.5);
    CHECK(fit.aic_per_obs < 5.0);

    Eigen::VectorXd vt = truth.flatten(spec), vf = fit.params.flatten(spec);
    int within = 0, counted = 0;
    for (int i = 0; i < vt.size(); ++i) {
        if (!std::isfinite(fit.std_errors[i])) continue;
        ++counted;
        if (std::fabs(vf[i] - vt[i]) <= 3.0 * fit.std_errors[i] + 1e-8) ++within;
    }
    CHECK(counted >= 9);
    CHECK(within >= counted - 1);  // allow one marginal miss in a single-seed unit test

    // white noise with an APARCH(1,1) spec: alpha stays near zero and the
    // unconditional scale is matched
    {
        RngStream rng(55);
        Eigen::VectorXd wn(3000);
        for (int i = 0; i < 3000; ++i) wn[i] = 1.4 * rng.next_gaussian();
        FitOptions o2;
        o2.multistarts = 2;
        o2.compute_std_errors = false;
        ArmaAparchFit f = fit_arma_aparch({0, 0, 1, 1}, wn, o2);
        CHECK(f.params.alpha[0] < 0.05);
        double uncond = f.sigma_path.tail(1000).mean();
        CHECK(uncond == doctest::Approx(1.4).epsilon(0.15));
    }

    // refit on the model's own resimulated data moves aic_per_obs by < 0.05
    {
        Eigen::VectorXd r2 = simulate_arma_aparch(spec, fit.params, 10000, 31);
        FitOptions o3;
        o3.multistarts = 2;
        o3.compute_std_errors = false;
        ArmaAparchFit f2 = fit_arma_aparch(spec, r2, o3);
        CHECK(std::fabs(f2.aic_per_obs - fit.aic_per_obs) < 0.05);
    }
}

TEST_CASE("fit json carries the exact parameter-name contract") {
    ArmaAparchSpec spec{1, 2, 1, 1};
    for (int i = 0; i < spec.n_params(); ++i) (void)ArmaAparchParams::param_name(spec, i);
    CHECK(ArmaAparchParams::param_name(spec, 0) == "mu");
    CHECK(ArmaAparchParams::param_name(spec, 1) == "ar1");
    CHECK(ArmaAparchParams::param_name(spec, 2) == "ma1");
    CHECK(ArmaAparchParams::param_name(spec, 3) == "ma2");
    CHECK(ArmaAparchParams::param_name(spec, 4) == "omega");
    CHECK(ArmaAparchParams::param_name(spec, 5) == "alpha1");
    CHECK(ArmaAparchParams::param_name(spec, 6) == "gamma1");
    CHECK(ArmaAparchParams::param_name(spec, 7) == "beta1");
    CHECK(ArmaAparchParams::param_name(spec, 8) == "delta");
    CHECK(ArmaAparchParams::param_name(spec, 9) == "skew");
    CHECK(ArmaAparchParams::param_name(spec, 10) == "shape");

    ArmaAparchParams p = table3_like_params();
    ArmaAparchFit fit;
    fit.spec = spec;
    fit.params = p;
    fit.returns = Eigen::VectorXd::Zero(10);
    fit.std_errors = Eigen::VectorXd::Constant(spec.n_params(), 0.1);
    std::string j = fit_to_json_string(fit);
    CHECK(j.find("\"ma2\":0.03") != std::string::npos);
    CHECK(j.find("\"gamma1\":0.91") != std::string::npos);
}
