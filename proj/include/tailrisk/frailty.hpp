#pragma once

#include "tailrisk/archimedean.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

// Positive stable S_alpha with Laplace transform exp(-t^alpha), alpha in (0,1];
// Chambers-Mallows-Stuck construction, degenerate at 1 for alpha = 1.
double sample_positive_stable(double alpha, RngStream& rng);

// Gamma(shape, 1) via Marsaglia-Tsang (shape < 1 boosted through shape + 1).
double sample_gamma(double shape, RngStream& rng);

// Logarithmic-series law on {1,2,...} with parameter p in (0,1); Kemp's algorithm.
double sample_log_series(double p, RngStream& rng);

// Sibuya(alpha) on {1,2,...}: inverse transform on the exact survival function
// P(X > n) = Gamma(n+1-alpha) / (Gamma(n+1) Gamma(1-alpha)).
double sample_sibuya(double alpha, RngStream& rng);

// Exponentially tilted stable with Laplace transform exp(-lam((1+t)^alpha - 1)).
// Exact block rejection for moderate lam; three-cumulant gamma asymptotic
// beyond (the regime where the law is within O(1/lam) of its gamma shadow).
double sample_tilted_stable(double alpha, double lam, RngStream& rng);

// Frailty V with E[exp(-tV)] = frailty_laplace(gen, t):
// Gumbel -> positive stable, Clayton -> Gamma(1/theta), Frank -> log-series,
// Joe -> Sibuya.
double sample_frailty(const ArchimedeanGenerator& gen, RngStream& rng);

}  // namespace tailrisk
