#include "tailrisk/frailty.hpp"

#include <cmath>
#include <stdexcept>

namespace tailrisk {

double sample_positive_stable(double alpha, RngStream& rng) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::domain_error("sample_positive_stable: alpha must be in (0,1]");
    if (alpha > 1.0 - 1e-12) return 1.0;  // LT exp(-t): point mass
    double th = M_PI * rng.next_uniform();
    double e = rng.next_exponential();
    // Chambers-Mallows-Stuck in log space; the tail of S_alpha overflows a
    // double for small alpha, so the log form is clamped rather than the value.
    double lv = std::log(std::sin(alpha * th)) - std::log(std::sin(th)) / alpha +
                (1.0 - alpha) / alpha * (std::log(std::sin((1.0 - alpha) * th)) - std::log(e));
    return std::exp(std::min(lv, 700.0));
}

double sample_gamma(double shape, RngStream& rng) {
    if (!(shape > 0.0)) throw std::domain_error("sample_gamma: shape must be > 0");
    if (shape < 1.0) {
        double u = rng.next_uniform();
        return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
        double x, v;
        do {
            x = rng.next_gaussian();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        double u = rng.next_uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double sample_log_series(double p, RngStream& rng) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("sample_log_series: p must be in (0,1)");
    // Kemp (1981)
    const double r = std::log1p(-p);
    for (;;) {
        double v = rng.next_uniform();
        if (v >= p) return 1.0;
        double u = rng.next_uniform();
        double q = -std::expm1(r * u);
        if (v <= q * q) {
            double k = std::floor(1.0 + std::log(v) / std::log(q));
            if (k < 1.0 || !std::isfinite(k)) continue;
            return k;
        }
        return v < q ? 2.0 : 1.0;
    }
}

namespace {

// log P(X > n) for Sibuya(alpha)
double sibuya_log_survival(double n, double alpha) {
    return std::lgamma(n + 1.0 - alpha) - std::lgamma(n + 1.0) - std::lgamma(1.0 - alpha);
}

}  // namespace

double sample_sibuya(double alpha, RngStream& rng) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::domain_error("sample_sibuya: alpha must be in (0,1]");
    if (alpha > 1.0 - 1e-12) return 1.0;
    double u = rng.next_uniform();
    double lt = std::log1p(-u);  // log of the survival target
    if (lt >= std::log1p(-alpha)) return 1.0;

    // asymptotic start n ~ ((1-u) Gamma(1-alpha))^(-1/alpha), then exact
    // bisection on the closed-form survival
    double ln_n = -(lt + std::lgamma(1.0 - alpha)) / alpha;
    if (ln_n > 34.5) return std::exp(std::min(ln_n, 700.0));  // beyond 2^53: discreteness is moot
    double hi = std::max(2.0, std::ceil(std::exp(ln_n)));
    double lo = 1.0;
    while (sibuya_log_survival(hi, alpha) > lt) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 0.5) {
        double mid = std::floor(0.5 * (lo + hi));
        if (mid <= lo) break;
        if (sibuya_log_survival(mid, alpha) <= lt)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double sample_tilted_stable(double alpha, double lam, RngStream& rng) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::domain_error("sample_tilted_stable: alpha must be in (0,1]");
    if (alpha > 1.0 - 1e-12) return lam;  // LT exp(-lam t)
    if (lam <= 100.0) {
        // exact: split into m blocks, each a stable draw accepted with prob e^-S;
        // block acceptance is exp(-lam/m) >= 1/e
        int m = std::max(1, static_cast<int>(std::ceil(lam)));
        double scale = std::pow(lam / m, 1.0 / alpha);
        double total = 0.0;
        for (int b = 0; b < m; ++b) {
            for (;;) {
                double s = scale * sample_positive_stable(alpha, rng);
                double u = rng.next_uniform();
                if (std::log(u) < -s) {
                    total += s;
                    break;
                }
            }
        }
        return total;
    }
    // large tilt: the law is within O(1/lam) of a gamma matched on the first
    // three cumulants k_r = lam alpha (1-alpha)...(r-1-alpha)
    double k1 = lam * alpha;
    double k2 = lam * alpha * (1.0 - alpha);
    double k3 = lam * alpha * (1.0 - alpha) * (2.0 - alpha);
    double b = k3 / (2.0 * k2);
    double shape = k2 / (b * b);
    double shift = k1 - b * shape;
    double v = shift + b * sample_gamma(shape, rng);
    return std::max(v, 1e-12);
}

double sample_frailty(const ArchimedeanGenerator& gen, RngStream& rng) {
    gen.validate();
    switch (gen.family) {
        case GeneratorFamily::gumbel: return sample_positive_stable(1.0 / gen.theta, rng);
        case GeneratorFamily::clayton: return sample_gamma(1.0 / gen.theta, rng);
        case GeneratorFamily::frank: return sample_log_series(-std::expm1(-gen.theta), rng);
        case GeneratorFamily::joe: return sample_sibuya(1.0 / gen.theta, rng);
    }
    throw std::logic_error("sample_frailty: bad enum");
}

}  // namespace tailrisk
