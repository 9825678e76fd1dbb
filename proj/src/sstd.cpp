#include "tailrisk/sstd.hpp"

#include <cmath>
#include <stdexcept>

#include "tailrisk/special.hpp"

namespace tailrisk {

SstdDist::SstdDist(double skew, double shape) : skew_(skew), shape_(shape) {
    if (!(skew > 0.0)) throw std::domain_error("sstd: skew must be > 0");
    if (!(shape > 2.0)) throw std::domain_error("sstd: shape must be > 2");
    scale_ = std::sqrt(shape / (shape - 2.0));
    log_norm_ = std::lgamma(0.5 * (shape + 1.0)) - std::lgamma(0.5 * shape) -
                0.5 * std::log(M_PI * (shape - 2.0));
    // absolute first moment of the unit-variance t
    double m1 = 2.0 * std::exp(log_norm_) * (shape - 2.0) / (shape - 1.0);
    m_ = m1 * (skew - 1.0 / skew);
    double ex2 = (skew * skew * skew + 1.0 / (skew * skew * skew)) / (skew + 1.0 / skew);
    s_ = std::sqrt(ex2 - m_ * m_);
    p0_ = 1.0 / (1.0 + skew * skew);
}

double SstdDist::log_pdf(double z) const {
    double x = m_ + s_ * z;
    double xs = x >= 0.0 ? x / skew_ : x * skew_;
    double lf = log_norm_ - 0.5 * (shape_ + 1.0) * std::log1p(xs * xs / (shape_ - 2.0));
    return std::log(2.0 * s_ / (skew_ + 1.0 / skew_)) + lf;
}

double SstdDist::pdf(double z) const { return std::exp(log_pdf(z)); }

double SstdDist::base_cdf(double x) const { return student_t_cdf(x * scale_, shape_); }

double SstdDist::base_quantile(double q) const { return student_t_quantile(q, shape_) / scale_; }

double SstdDist::cdf(double z) const {
    double x = m_ + s_ * z;
    double c = skew_ + 1.0 / skew_;
    if (x < 0.0) return (2.0 / c) / skew_ * base_cdf(x * skew_);
    return p0_ + (2.0 / c) * skew_ * (base_cdf(x / skew_) - 0.5);
}

double SstdDist::quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("sstd quantile: u must be in (0,1)");
    double c = skew_ + 1.0 / skew_;
    double x;
    if (u < p0_) {
        x = base_quantile(0.5 * u * c * skew_) / skew_;
    } else {
        x = skew_ * base_quantile(0.5 + (u - p0_) * c / (2.0 * skew_));
    }
    return (x - m_) / s_;
}

double sstd_density(double z, double skew, double shape) { return SstdDist(skew, shape).pdf(z); }
double sstd_cdf(double z, double skew, double shape) { return SstdDist(skew, shape).cdf(z); }
double sstd_quantile(double u, double skew, double shape) {
    return SstdDist(skew, shape).quantile(u);
}

}  // namespace tailrisk
