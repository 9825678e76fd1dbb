#pragma once

namespace tailrisk {

double normal_cdf(double x);
double normal_pdf(double x);
// Inverse of normal_cdf, accurate to ~1e-15 (rational initial guess + one Halley step).
double normal_quantile(double p);

// Regularized incomplete beta function I_x(a, b).
double reg_incomplete_beta(double a, double b, double x);

// CDF / quantile of the (unstandardized) Student-t distribution with nu > 0.
double student_t_cdf(double t, double nu);
double student_t_quantile(double p, double nu);

// Upper tail probability of a chi-square variable with k in {1, 2}.
double chi_square_sf(double x, int k);

}  // namespace tailrisk
