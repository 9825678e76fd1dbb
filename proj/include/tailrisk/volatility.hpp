#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "tailrisk/sstd.hpp"

namespace tailrisk {

struct ArmaAparchSpec {
    int p = 1, q = 2;  // ARMA orders
    int m = 1, n = 1;  // APARCH orders

    void validate() const;  // throws on negative orders or GARCH terms without ARCH terms
    // mu, ar(p), ma(q), omega, alpha(m), gamma(m), beta(n), delta, skew, shape
    int n_params() const { return 5 + p + q + 2 * m + n; }
};

struct ArmaAparchParams {
    double mu = 0.0;          // conditional-mean intercept, return units
    Eigen::VectorXd ar, ma;   // sizes p, q
    double omega = 0.01;      // variance-scale units (sigma^delta)
    Eigen::VectorXd alpha;    // size m, >= 0
    Eigen::VectorXd gamma;    // size m, in (-1,1)
    Eigen::VectorXd beta;     // size n, >= 0
    double delta = 2.0;       // power, > 0
    double skew = 1.0;        // innovation skewness, > 0
    double shape = 8.0;       // innovation tail, > 2

    // positivity / range constraints; throws std::domain_error
    void validate(const ArmaAparchSpec& spec) const;

    Eigen::VectorXd flatten(const ArmaAparchSpec& spec) const;
    static ArmaAparchParams unflatten(const ArmaAparchSpec& spec,
                                      const Eigen::Ref<const Eigen::VectorXd>& v);
    static std::string param_name(const ArmaAparchSpec& spec, int i);  // mu, ar1.., omega, ...
};

struct AparchFilterResult {
    Eigen::VectorXd sigma;      // conditional scale sigma_t, strictly positive
    Eigen::VectorXd eps;        // mean-equation innovations
    Eigen::VectorXd residuals;  // standardized z_t = eps_t / sigma_t
};

// Runs Eqs. of the mean/scale recursions over the sample. Initialization:
// presample eps = 0, presample returns = sample mean, presample
// sigma^delta = mean |r - rbar|^delta.
AparchFilterResult aparch_filter(const ArmaAparchSpec& spec, const ArmaAparchParams& params,
                                 const Eigen::Ref<const Eigen::VectorXd>& returns);

// Quasi-ML objective sum_t [ln sstd_pdf(z_t) - ln sigma_t]. Returns -inf for
// parameter vectors violating the constraints or stationarity (the optimizer
// relies on that sentinel).
double aparch_loglik(const ArmaAparchSpec& spec, const ArmaAparchParams& params,
                     const Eigen::Ref<const Eigen::VectorXd>& returns);

// 1 - [sum_j alpha_j E(|Z|-gamma_j Z)^delta + sum_k beta_k]; positive iff the
// process is second-order stationary. The expectation is taken under the
// standardized skew-t by adaptive quadrature.
double stationarity_margin(const ArmaAparchSpec& spec, const ArmaAparchParams& params);

struct FitOptions {
    int multistarts = 5;
    std::uint64_t seed = 0;
    int nm_max_iter = 1600;
    int bfgs_max_iter = 120;
    bool compute_std_errors = true;
};

struct ArmaAparchFit {
    ArmaAparchSpec spec;
    ArmaAparchParams params;
    Eigen::VectorXd returns;  // the series the model was fitted on
    Eigen::VectorXd sigma_path;
    Eigen::VectorXd eps_path;
    Eigen::VectorXd residuals;  // standardized
    double loglik = 0.0;
    double aic_total = 0.0;
    double aic_per_obs = 0.0;
    bool converged = false;
    Eigen::VectorXd std_errors;  // per flattened natural parameter; NaN when unavailable
};

// Maximum likelihood over log/logit-transformed parameters, multistart
// Nelder-Mead with a quasi-Newton polish. Deterministic for a given seed.
ArmaAparchFit fit_arma_aparch(const ArmaAparchSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& returns,
                              const FitOptions& options = {});

struct OneStepForecast {
    double mu_next = 0.0;
    double sigma_next = 0.0;
};

OneStepForecast forecast_one_step(const ArmaAparchFit& fit);

// Simulates T observations after a 500-step burn-in; innovations are inverse-
// transform draws from the fitted sstd law. Rejects non-stationary parameters.
Eigen::VectorXd simulate_arma_aparch(const ArmaAparchSpec& spec, const ArmaAparchParams& params,
                                     int t_len, std::uint64_t seed);

std::string fit_to_json_string(const ArmaAparchFit& fit);

}  // namespace tailrisk
