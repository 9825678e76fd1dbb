#pragma once

#include <cmath>
#include <cstddef>
#include <queue>
#include <stdexcept>
#include <vector>

namespace tailrisk {

// Adaptive Gauss-Kronrod (G7,K15) on a finite interval. Splits the worst
// interval until the summed error estimate is below tol (absolute).
template <typename F>
double integrate(F&& f, double a, double b, double tol = 1e-12, int max_intervals = 4000) {
    // QUADPACK 15-point Kronrod nodes/weights and embedded 7-point Gauss weights.
    static const double xk[8] = {0.0,
                                 0.2077849550078985,
                                 0.4058451513773972,
                                 0.5860872354676911,
                                 0.7415311855993944,
                                 0.8648644233597691,
                                 0.9491079123427585,
                                 0.9914553711208126};
    static const double wk[8] = {0.2094821410847278, 0.2044329400752989, 0.1903505780647854,
                                 0.1690047266392679, 0.1406532597155259, 0.1047900103222502,
                                 0.0630920926299786, 0.0229353220105292};
    static const double wg[4] = {0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
                                 0.1294849661688697};

    struct Panel {
        double a, b, value, error;
        bool operator<(const Panel& o) const { return error < o.error; }
    };

    auto eval = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        double fc = f(c);
        double k = wk[0] * fc;
        double g = wg[0] * fc;
        for (int i = 1; i < 8; ++i) {
            double f1 = f(c - h * xk[i]);
            double f2 = f(c + h * xk[i]);
            k += wk[i] * (f1 + f2);
            if (i % 2 == 0) g += wg[i / 2] * (f1 + f2);
        }
        double value = k * h;
        double err = std::fabs((k - g) * h);
        return Panel{lo, hi, value, err};
    };

    std::priority_queue<Panel> heap;
    Panel p0 = eval(a, b);
    double total = p0.value, toterr = p0.error;
    heap.push(p0);
    int n = 1;
    while (toterr > tol && n < max_intervals) {
        Panel worst = heap.top();
        heap.pop();
        double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) break;  // interval at machine resolution
        Panel l = eval(worst.a, mid), r = eval(mid, worst.b);
        total += l.value + r.value - worst.value;
        toterr += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        ++n;
    }
    if (!std::isfinite(total)) throw std::runtime_error("integrate: non-finite result");
    return total;
}

// Integral over [a, inf) via the substitution x = a + u/(1-u), u in [0,1).
template <typename F>
double integrate_upper(F&& f, double a, double tol = 1e-12) {
    auto g = [&](double u) {
        double om = 1.0 - u;
        double x = a + u / om;
        return f(x) / (om * om);
    };
    // stop a hair short of 1; the integrand must vanish fast enough for this to converge
    return integrate(g, 0.0, 1.0 - 1e-14, tol);
}

}  // namespace tailrisk
