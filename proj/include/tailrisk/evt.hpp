#pragma once

#include <Eigen/Dense>
#include <string>

namespace tailrisk {

struct GpdTail {
    double xi = 0.0;        // tail index
    double beta = 1.0;      // scale, > 0
    double threshold = 0.0; // u^L or u^R in residual units
    int n_exceed = 0;
    int n_total = 0;
    bool mle_converged = true;  // false when the PWM fallback supplied the estimate
};

// Piecewise marginal distribution for standardized residuals: GPD beyond the
// empirical tail_fraction quantiles on both sides, Gaussian-kernel-smoothed
// ECDF in between, rescaled so the three pieces join continuously with
// cdf(u^L) = N_{u^L}/N and cdf(u^R) = 1 - N_{u^R}/N exactly.
struct SemiParametricMargin {
    GpdTail lower, upper;
    double tail_fraction = 0.10;
    Eigen::VectorXd grid_z;    // interior support, strictly increasing
    Eigen::VectorXd grid_cdf;  // cdf values on grid_z, strictly increasing
};

// GPD log-likelihood for non-negative exceedances y (support check included;
// -inf outside the feasible region).
double gpd_loglik(double xi, double beta, const Eigen::Ref<const Eigen::VectorXd>& y);

// Maximum likelihood on (log beta, xi) with xi constrained to (-0.5, 1);
// probability-weighted-moment start, and PWM fallback (flagged) if the
// optimizer fails to move.
GpdTail fit_gpd_mle(const Eigen::Ref<const Eigen::VectorXd>& exceedances);

SemiParametricMargin fit_margin(const Eigen::Ref<const Eigen::VectorXd>& residuals,
                                double tail_fraction = 0.10);

double margin_cdf(const SemiParametricMargin& margin, double z);
double margin_quantile(const SemiParametricMargin& margin, double u);

std::string margin_to_json_string(const SemiParametricMargin& margin);
SemiParametricMargin margin_from_json_string(const std::string& text);

}  // namespace tailrisk
