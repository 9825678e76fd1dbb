#include "tailrisk/archimedean.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tailrisk/frailty.hpp"
#include "tailrisk/quadrature.hpp"

namespace tailrisk {

const char* family_name(GeneratorFamily f) {
    switch (f) {
        case GeneratorFamily::gumbel: return "gumbel";
        case GeneratorFamily::clayton: return "clayton";
        case GeneratorFamily::frank: return "frank";
        case GeneratorFamily::joe: return "joe";
    }
    throw std::logic_error("family_name: bad enum");
}

GeneratorFamily family_from_name(const std::string& name) {
    if (name == "gumbel") return GeneratorFamily::gumbel;
    if (name == "clayton") return GeneratorFamily::clayton;
    if (name == "frank") return GeneratorFamily::frank;
    if (name == "joe") return GeneratorFamily::joe;
    throw std::invalid_argument("unknown copula family: " + name);
}

void ArchimedeanGenerator::validate() const {
    if (!std::isfinite(theta)) throw std::domain_error("generator theta must be finite");
    switch (family) {
        case GeneratorFamily::gumbel:
        case GeneratorFamily::joe:
            if (theta < 1.0) throw std::domain_error("gumbel/joe require theta >= 1");
            break;
        case GeneratorFamily::clayton:
        case GeneratorFamily::frank:
            if (theta <= 0.0) throw std::domain_error("clayton/frank require theta > 0");
            break;
    }
}

namespace {

void check_unit_open_closed(double t) {
    if (!(t > 0.0 && t <= 1.0)) throw std::domain_error("generator argument must be in (0,1]");
}

}  // namespace

double psi(const ArchimedeanGenerator& gen, double t) {
    check_unit_open_closed(t);
    const double th = gen.theta;
    switch (gen.family) {
        case GeneratorFamily::gumbel:
            return std::pow(-std::log(t), th);
        case GeneratorFamily::clayton:
            return std::expm1(-th * std::log(t)) / th;  // (t^-theta - 1)/theta
        case GeneratorFamily::frank: {
            // 1 - (1-e^-tht)/(1-e^-th), kept in this form to survive t -> 1
            double g = std::exp(-th * t) * std::expm1(-th * (1.0 - t)) / std::expm1(-th);
            if (g < 0.5) return -std::log1p(-g);
            return -std::log(std::expm1(-th * t) / std::expm1(-th));
        }
        case GeneratorFamily::joe:
            return -std::log1p(-std::exp(th * std::log1p(-t)));
    }
    throw std::logic_error("psi: bad enum");
}

double psi_inverse(const ArchimedeanGenerator& gen, double s) {
    if (!(s >= 0.0)) throw std::domain_error("psi_inverse argument must be >= 0");
    const double th = gen.theta;
    switch (gen.family) {
        case GeneratorFamily::gumbel:
            return std::exp(-std::pow(s, 1.0 / th));
        case GeneratorFamily::clayton:
            return std::exp(-std::log1p(th * s) / th);
        case GeneratorFamily::frank: {
            if (s < 0.5) {
                // 1 + e^-s (e^-theta - 1) = (1 - e^-s) + e^-(theta+s)
                double arg = -std::expm1(-s) + std::exp(-th - s);
                return std::min(1.0, -std::log(arg) / th);
            }
            double z = std::exp(-s) * (-std::expm1(-th));  // in [0, ~0.61)
            double val = -std::log1p(-z) / th;
            return std::max(val, 1e-300);
        }
        case GeneratorFamily::joe:
            return 1.0 - std::pow(-std::expm1(-s), 1.0 / th);
    }
    throw std::logic_error("psi_inverse: bad enum");
}

double psi_prime(const ArchimedeanGenerator& gen, double t) {
    check_unit_open_closed(t);
    const double th = gen.theta;
    switch (gen.family) {
        case GeneratorFamily::gumbel:
            return -th * std::pow(-std::log(t), th - 1.0) / t;
        case GeneratorFamily::clayton:
            return -std::pow(t, -th - 1.0);
        case GeneratorFamily::frank: {
            double e = std::exp(-th * t);
            return th * e / (e - 1.0);
        }
        case GeneratorFamily::joe: {
            double p = std::pow(1.0 - t, th - 1.0);
            return -th * p / (1.0 - p * (1.0 - t));
        }
    }
    throw std::logic_error("psi_prime: bad enum");
}

double frailty_laplace(const ArchimedeanGenerator& gen, double t) {
    if (!(t >= 0.0)) throw std::domain_error("frailty_laplace argument must be >= 0");
    if (gen.family == GeneratorFamily::clayton)
        return std::exp(-std::log1p(t) / gen.theta);  // (1+t)^(-1/theta)
    return psi_inverse(gen, t);
}

double frailty_laplace_inverse(const ArchimedeanGenerator& gen, double u) {
    check_unit_open_closed(u);
    if (gen.family == GeneratorFamily::clayton)
        return std::expm1(-gen.theta * std::log(u));  // u^-theta - 1
    return psi(gen, u);
}

double ac_cdf(const ArchimedeanGenerator& gen, const Eigen::Ref<const Eigen::VectorXd>& u) {
    if (u.size() < 2) throw std::domain_error("ac_cdf needs dimension >= 2");
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) s += psi(gen, u[i]);
    return psi_inverse(gen, s);
}

namespace {

// Second derivative of psi_inverse, closed form per family.
double psi_inverse_second(const ArchimedeanGenerator& gen, double s) {
    const double th = gen.theta;
    switch (gen.family) {
        case GeneratorFamily::gumbel: {
            double a = 1.0 / th;
            double e = std::exp(-std::pow(s, a));
            return e * (a * a * std::pow(s, 2 * a - 2.0) +
                        a * (1.0 - a) * std::pow(s, a - 2.0));
        }
        case GeneratorFamily::clayton:
            return (1.0 + th) * std::exp((-1.0 / th - 2.0) * std::log1p(th * s));
        case GeneratorFamily::frank: {
            double mw = std::exp(-s) * (-std::expm1(-th));          // -w, in (0, 1)
            double opw = -std::expm1(-s) + std::exp(-th - s);       // 1 + w, stable
            return mw / (th * opw * opw);
        }
        case GeneratorFamily::joe: {
            double q = std::exp(-s);
            double omq = -std::expm1(-s);  // 1 - q
            double a = 1.0 / th;
            return a * q * std::pow(omq, a - 2.0) * (omq - (a - 1.0) * q);
        }
    }
    throw std::logic_error("psi_inverse_second: bad enum");
}

}  // namespace

double ac_bivariate_density(const ArchimedeanGenerator& gen, double u, double v) {
    if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0))
        throw std::domain_error("ac_bivariate_density needs (u,v) in the open unit square");
    double s = psi(gen, u) + psi(gen, v);
    return psi_inverse_second(gen, s) * psi_prime(gen, u) * psi_prime(gen, v);
}

namespace {

// Debye function D1(x) = (1/x) int_0^x t/(e^t - 1) dt, x > 0.
double debye1(double x) {
    auto f = [](double t) { return t < 1e-12 ? 1.0 - 0.5 * t : t / std::expm1(t); };
    // integrand is below 3e-20 past t = 50; capping keeps the adaptive rule
    // from spreading its nodes over a dead interval for very large x
    return integrate(f, 0.0, std::min(x, 50.0), 1e-12) / x;
}

double psi_over_prime(const ArchimedeanGenerator& gen, double t) {
    // psi/psi' written to stay finite at both endpoints
    const double th = gen.theta;
    switch (gen.family) {
        case GeneratorFamily::gumbel:
            return t * std::log(t) / th;
        case GeneratorFamily::clayton:
            return -(t - std::pow(t, th + 1.0)) / th;
        case GeneratorFamily::frank: {
            // psi/psi' = -psi(t) expm1(th t)/th; the a > 30 branch is the
            // asymptotically exact product psi * expm1(th t)
            double a = th * t;
            double h = (a > 30.0) ? std::expm1(-th * (1.0 - t)) / std::expm1(-th)
                                  : psi(gen, t) * std::expm1(a);
            return -h / th;
        }
        case GeneratorFamily::joe: {
            double l = th * std::log1p(-t);  // ln (1-t)^theta
            if (l < -500.0) return -(1.0 - t) / th;
            double pt = std::exp(l);
            double omp = -std::expm1(l);
            return std::log(omp) * omp * (1.0 - t) / (th * pt);
        }
    }
    throw std::logic_error("psi_over_prime: bad enum");
}

}  // namespace

double tau_eq_quadrature(const ArchimedeanGenerator& gen) {
    gen.validate();
    auto f = [&](double t) { return psi_over_prime(gen, t); };
    return 1.0 + 4.0 * integrate(f, 0.0, 1.0, 1e-10);
}

double tau_from_theta(const ArchimedeanGenerator& gen) {
    gen.validate();
    const double th = gen.theta;
    switch (gen.family) {
        case GeneratorFamily::gumbel:
            return 1.0 - 1.0 / th;
        case GeneratorFamily::clayton:
            return th / (th + 2.0);
        case GeneratorFamily::frank:
            return 1.0 - 4.0 / th * (1.0 - debye1(th));
        case GeneratorFamily::joe:
            return tau_eq_quadrature(gen);
    }
    throw std::logic_error("tau_from_theta: bad enum");
}

double theta_from_tau(GeneratorFamily family, double tau) {
    if (!(tau > 0.0 && tau < 1.0))
        throw std::range_error("theta_from_tau: tau must be in the open interval (0,1)");
    switch (family) {
        case GeneratorFamily::gumbel:
            return 1.0 / (1.0 - tau);
        case GeneratorFamily::clayton:
            return 2.0 * tau / (1.0 - tau);
        default: break;
    }

    // Frank / Joe: bracketed bisection refined by secant-Newton steps.
    const bool joe = family == GeneratorFamily::joe;
    auto tau_at = [&](double th) {
        return tau_from_theta({family, th}) - tau;
    };
    double lo = joe ? 1.0 + 1e-6 : 1e-6;
    double hi = joe ? 100.0 : 50.0;
    double flo = tau_at(lo);
    if (flo >= 0.0) return lo;  // below the smallest representable dependence
    double fhi = tau_at(hi);
    int guard = 0;
    while (fhi < 0.0) {
        lo = hi;
        flo = fhi;
        hi *= 4.0;
        fhi = tau_at(hi);
        if (++guard > 12) throw std::range_error("theta_from_tau: tau too close to 1");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, lo); ++it) {
        // secant proposal, fall back to bisection when it leaves the bracket
        double mid = lo + (hi - lo) * (-flo) / (fhi - flo);
        double width = hi - lo;
        if (!(mid > lo + 1e-3 * width && mid < hi - 1e-3 * width)) mid = 0.5 * (lo + hi);
        double fm = tau_at(mid);
        if (fm == 0.0) return mid;
        if (fm < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    return 0.5 * (lo + hi);
}

double tau_monte_carlo(const ArchimedeanGenerator& gen, int n, std::uint64_t seed) {
    if (n < 1000) throw std::invalid_argument("tau_monte_carlo: n >= 1000 required");
    UniformSample s = sample_ac(gen, 2, n, seed);
    double acc = 0.0;
    Eigen::Vector2d uv;
    for (int i = 0; i < n; ++i) {
        uv << s.values(i, 0), s.values(i, 1);
        acc += ac_cdf(gen, uv);
    }
    return 4.0 * acc / n - 1.0;
}

namespace {

double clamp_open_unit(double u) {
    constexpr double lo = 1e-300;
    const double hi = 1.0 - 1.1102230246251565e-16;  // nextafter(1,0)
    return std::min(std::max(u, lo), hi);
}

}  // namespace

UniformSample sample_ac(const ArchimedeanGenerator& gen, int d, int n, std::uint64_t seed) {
    gen.validate();
    if (d < 2) throw std::invalid_argument("sample_ac: d >= 2 required");
    if (n < 1) throw std::invalid_argument("sample_ac: n >= 1 required");
    UniformSample out;
    out.values.resize(n, d);
    for (int i = 0; i < n; ++i) {
        RngStream rng = substream(seed, 0xACu, static_cast<std::uint64_t>(i));
        double v = sample_frailty(gen, rng);
        for (int j = 0; j < d; ++j) {
            double e = rng.next_exponential();
            out.values(i, j) = clamp_open_unit(frailty_laplace(gen, e / v));
        }
    }
    return out;
}

namespace {

// Counts inversions of y (strictly decreasing pairs) by merge sort.
double merge_count(std::vector<double>& y, std::vector<double>& buf, std::size_t lo,
                   std::size_t hi) {
    if (hi - lo < 2) return 0.0;
    std::size_t mid = lo + (hi - lo) / 2;
    double swaps = merge_count(y, buf, lo, mid) + merge_count(y, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (y[i] <= y[j]) {
            buf[k++] = y[i++];
        } else {
            swaps += static_cast<double>(mid - i);
            buf[k++] = y[j++];
        }
    }
    while (i < mid) buf[k++] = y[i++];
    while (j < hi) buf[k++] = y[j++];
    std::copy(buf.begin() + lo, buf.begin() + hi, y.begin() + lo);
    return swaps;
}

double tie_pairs(const std::vector<double>& sorted) {
    double total = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        double t = static_cast<double>(j - i);
        total += 0.5 * t * (t - 1.0);
        i = j;
    }
    return total;
}

}  // namespace

double kendall_tau(const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y) {
    const std::size_t n = static_cast<std::size_t>(x.size());
    if (y.size() != x.size() || n < 2) throw std::invalid_argument("kendall_tau: size mismatch");
    if ((x.array() == x[0]).all() || (y.array() == y[0]).all())
        throw std::invalid_argument("kendall_tau: constant column");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    // ties in x and joint ties, scanning x-sorted order
    double n1 = 0.0, n12 = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && x[order[j]] == x[order[i]]) ++j;
        double t = static_cast<double>(j - i);
        n1 += 0.5 * t * (t - 1.0);
        std::size_t a = i;
        while (a < j) {
            std::size_t b = a;
            while (b < j && y[order[b]] == y[order[a]]) ++b;
            double s = static_cast<double>(b - a);
            n12 += 0.5 * s * (s - 1.0);
            a = b;
        }
        i = j;
    }

    std::vector<double> ys(n), buf(n);
    for (std::size_t k = 0; k < n; ++k) ys[k] = y[order[k]];
    double swaps = merge_count(ys, buf, 0, n);  // ys ends up sorted
    double n2 = tie_pairs(ys);

    const double n0 = 0.5 * static_cast<double>(n) * (static_cast<double>(n) - 1.0);
    double num = n0 - n1 - n2 + n12 - 2.0 * swaps;
    double den = std::sqrt((n0 - n1) * (n0 - n2));
    return num / den;
}

Eigen::MatrixXd empirical_kendall_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x) {
    const Eigen::Index d = x.cols();
    if (x.rows() < 2 || d < 1) throw std::invalid_argument("empirical_kendall_matrix: too small");
    Eigen::MatrixXd tau = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) {
            double t = kendall_tau(x.col(i), x.col(j));
            tau(i, j) = t;
            tau(j, i) = t;
        }
    return tau;
}

}  // namespace tailrisk
