#include "tailrisk/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tailrisk/rng.hpp"

namespace tailrisk {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0,1)");

    // Acklam's rational approximation, then one Halley refinement.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    double e = normal_cdf(x) - p;
    double u = e * std::sqrt(2 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1 + 0.5 * x * u);
    return x;
}

double RngStream::next_gaussian() { return normal_quantile(next_uniform()); }

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = std::numeric_limits<double>::epsilon();
    constexpr double kFpMin = std::numeric_limits<double>::min() / kEps;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 10 * kEps) break;
    }
    return h;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("reg_incomplete_beta: a,b must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double lnfront = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                     a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(lnfront);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double nu) {
    if (!(nu > 0.0)) throw std::domain_error("student_t_cdf: nu must be > 0");
    if (t == 0.0) return 0.5;
    double x = nu / (nu + t * t);
    double p = 0.5 * reg_incomplete_beta(0.5 * nu, 0.5, x);
    return t > 0.0 ? 1.0 - p : p;
}

double student_t_quantile(double p, double nu) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("student_t_quantile: p must be in (0,1)");
    if (!(nu > 0.0)) throw std::domain_error("student_t_quantile: nu must be > 0");
    if (p == 0.5) return 0.0;

    // Newton from a Cornish-Fisher-ish start, with bisection safeguarding.
    double x = normal_quantile(p);
    if (nu > 4.0) {
        double g1 = (x * x * x + x) / (4.0 * nu);  // first-order t expansion
        x += g1;
    } else {
        // crude but safe start for very heavy tails
        double sign = p < 0.5 ? -1.0 : 1.0;
        double pp = p < 0.5 ? p : 1.0 - p;
        x = sign * std::sqrt(nu * (std::pow(2.0 * pp, -2.0 / nu) - 1.0));
    }
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    const double lognc =
        std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * M_PI);
    for (int it = 0; it < 100; ++it) {
        double f = student_t_cdf(x, nu) - p;
        if (f > 0)
            hi = std::min(hi, x);
        else
            lo = std::max(lo, x);
        double dens = std::exp(lognc - 0.5 * (nu + 1.0) * std::log1p(x * x / nu));
        double step = f / dens;
        double xn = x - step;
        if (!(xn > lo && xn < hi)) {
            if (std::isinf(lo))
                xn = hi - std::max(1.0, std::fabs(hi));
            else if (std::isinf(hi))
                xn = lo + std::max(1.0, std::fabs(lo));
            else
                xn = 0.5 * (lo + hi);
        }
        if (std::fabs(xn - x) <= 1e-14 * (1.0 + std::fabs(xn))) return xn;
        x = xn;
    }
    return x;
}

double chi_square_sf(double x, int k) {
    if (x < 0.0) throw std::domain_error("chi_square_sf: x must be >= 0");
    switch (k) {
        case 1: return std::erfc(std::sqrt(0.5 * x));
        case 2: return std::exp(-0.5 * x);
        default: throw std::domain_error("chi_square_sf: k must be 1 or 2");
    }
}

}  // namespace tailrisk
