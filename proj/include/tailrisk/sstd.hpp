#pragma once

namespace tailrisk {

// Standardized (zero-mean, unit-variance) skewed Student-t: Fernandez-Steel
// skewing of the unit-variance t, followed by an affine standardization.
// skew = 1 recovers the symmetric standardized t; shape > 2 required.
// Construction precomputes the (skew, shape)-dependent constants, so hot loops
// should hold one instance rather than calling the free functions per point.
class SstdDist {
public:
    SstdDist(double skew, double shape);

    double pdf(double z) const;
    double log_pdf(double z) const;
    double cdf(double z) const;
    double quantile(double u) const;

    double skew() const { return skew_; }
    double shape() const { return shape_; }

private:
    double base_cdf(double x) const;       // unit-variance t
    double base_quantile(double q) const;

    double skew_, shape_;
    double scale_;     // sqrt(shape/(shape-2)): unit-variance t -> standard t
    double log_norm_;  // log normalizing constant of the unit-variance t
    double m_, s_;     // mean / sd of the unskewed-standardized FS variable
    double p0_;        // mass left of the FS mode, 1/(1+skew^2)
};

double sstd_density(double z, double skew, double shape);
double sstd_cdf(double z, double skew, double shape);
double sstd_quantile(double u, double skew, double shape);

}  // namespace tailrisk
