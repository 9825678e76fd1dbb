// Independent reference implementations used only by tests. Everything here
// is deliberately written the slow/obvious way so it cannot share a bug with
// the library code it checks.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace oracles {

// O(n^2) Kendall tau-b straight from the definition.
inline double brute_kendall(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const int n = static_cast<int>(x.size());
    double conc = 0, disc = 0, tx = 0, ty = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0)
                ++tx;
            else if (dy == 0)
                ++ty;
            else if (dx * dy > 0)
                ++conc;
            else
                ++disc;
        }
    return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

// Two-sided KS statistic of a sample against U(0,1).
inline double ks_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double f = static_cast<double>(i + 1) / n;
        double fm = static_cast<double>(i) / n;
        d = std::max(d, std::max(f - u[i], u[i] - fm));
    }
    return d;
}

// asymptotic KS critical value at the 1% level
inline double ks_crit_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

// Reference variance recursions for the APARCH special cases, one lag each,
// same initialization convention as the library filter (presample eps = 0,
// presample sigma^2 supplied).
inline Eigen::VectorXd garch_recursion(double omega, double a, double b,
                                       const Eigen::VectorXd& eps, double s0sq) {
    Eigen::VectorXd s2(eps.size());
    for (int t = 0; t < eps.size(); ++t) {
        double el = t > 0 ? eps[t - 1] : 0.0;
        double sl = t > 0 ? s2[t - 1] : s0sq;
        s2[t] = omega + a * el * el + b * sl;
    }
    return s2;
}

inline Eigen::VectorXd gjr_recursion(double omega, double a, double g, double b,
                                     const Eigen::VectorXd& eps, double s0sq) {
    Eigen::VectorXd s2(eps.size());
    for (int t = 0; t < eps.size(); ++t) {
        double el = t > 0 ? eps[t - 1] : 0.0;
        double sl = t > 0 ? s2[t - 1] : s0sq;
        s2[t] = omega + a * el * el + g * el * el * (el < 0.0 ? 1.0 : 0.0) + b * sl;
    }
    return s2;
}

inline Eigen::VectorXd tgarch_recursion(double omega, double ap, double am,
                                        const Eigen::VectorXd& eps) {
    Eigen::VectorXd s(eps.size());
    for (int t = 0; t < eps.size(); ++t) {
        double el = t > 0 ? eps[t - 1] : 0.0;
        s[t] = omega + ap * std::max(el, 0.0) + am * std::max(-el, 0.0);
    }
    return s;
}

// trapezoid-free 2-d midpoint quadrature of f over (0,1)^2 on an m x m grid
template <typename F>
double unit_square_integral(F&& f, int m) {
    double s = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            double u = (i + 0.5) / m, v = (j + 0.5) / m;
            s += f(u, v);
        }
    return s / (static_cast<double>(m) * m);
}

}  // namespace oracles
