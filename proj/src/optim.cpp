#include "tailrisk/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace tailrisk {

OptimResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                        const NelderMeadOptions& opt) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (int i = 1; i <= n; ++i) {
        double h = opt.step * std::max(1.0, std::fabs(x0[i - 1]));
        xs[i][i - 1] += h;
    }
    for (int i = 0; i <= n; ++i) fs[i] = f(xs[i]);

    auto order = [&] {
        std::vector<int> idx(n + 1);
        for (int i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        std::vector<Eigen::VectorXd> xs2(n + 1);
        std::vector<double> fs2(n + 1);
        for (int i = 0; i <= n; ++i) {
            xs2[i] = xs[idx[i]];
            fs2[i] = fs[idx[i]];
        }
        xs.swap(xs2);
        fs.swap(fs2);
    };

    OptimResult res;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        order();
        if (std::fabs(fs[n] - fs[0]) <= opt.ftol * (1.0 + std::fabs(fs[0]))) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += xs[i];
        centroid /= n;

        Eigen::VectorXd xr = centroid + (centroid - xs[n]);
        double fr = f(xr);
        if (fr < fs[0]) {
            Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[n]);
            double fe = f(xe);
            if (fe < fr) {
                xs[n] = xe;
                fs[n] = fe;
            } else {
                xs[n] = xr;
                fs[n] = fr;
            }
        } else if (fr < fs[n - 1]) {
            xs[n] = xr;
            fs[n] = fr;
        } else {
            Eigen::VectorXd xc = centroid + 0.5 * (xs[n] - centroid);
            double fc = f(xc);
            if (fc < fs[n]) {
                xs[n] = xc;
                fs[n] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
                    fs[i] = f(xs[i]);
                }
            }
        }
    }
    order();
    res.x = xs[0];
    res.value = fs[0];
    res.iterations = it;
    return res;
}

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double h_rel) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double h = h_rel * std::max(1.0, std::fabs(x[i]));
        xp[i] = x[i] + h;
        double fp = f(xp);
        xp[i] = x[i] - h;
        double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double h_rel) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd h_mat(n, n);
    Eigen::VectorXd hs(n);
    for (Eigen::Index i = 0; i < n; ++i) hs[i] = h_rel * std::max(1.0, std::fabs(x[i]));
    const double f0 = f(x);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        xp[i] = x[i] + hs[i];
        double fp = f(xp);
        xp[i] = x[i] - hs[i];
        double fm = f(xp);
        xp[i] = x[i];
        h_mat(i, i) = (fp - 2.0 * f0 + fm) / (hs[i] * hs[i]);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            xp[i] = x[i] + hs[i];
            xp[j] = x[j] + hs[j];
            double fpp = f(xp);
            xp[j] = x[j] - hs[j];
            double fpm = f(xp);
            xp[i] = x[i] - hs[i];
            double fmm = f(xp);
            xp[j] = x[j] + hs[j];
            double fmp = f(xp);
            xp[i] = x[i];
            xp[j] = x[j];
            double v = (fpp - fpm - fmp + fmm) / (4.0 * hs[i] * hs[j]);
            h_mat(i, j) = v;
            h_mat(j, i) = v;
        }
    }
    return h_mat;
}

OptimResult bfgs_minimize(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opt) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = x0;
    double fx = f(x);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g = fd_gradient(f, x, opt.fd_step);

    OptimResult res;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (!g.allFinite()) break;
        if (g.norm() <= opt.gtol * (1.0 + std::fabs(fx))) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd d = -hinv * g;
        if (d.dot(g) >= 0.0) d = -g;  // reset on a non-descent direction

        // Armijo backtracking
        double step = 1.0;
        double slope = g.dot(d);
        double fn = std::numeric_limits<double>::infinity();
        Eigen::VectorXd xn;
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls) {
            xn = x + step * d;
            fn = f(xn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) break;

        Eigen::VectorXd gn = fd_gradient(f, xn, opt.fd_step);
        Eigen::VectorXd s = xn - x;
        Eigen::VectorXd y = gn - g;
        double sy = s.dot(y);
        if (sy > 1e-12) {
            Eigen::VectorXd hy = hinv * y;
            double yhy = y.dot(hy);
            hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
                    (hy * s.transpose() + s * hy.transpose()) / sy;
        }
        double df = fx - fn;
        x = xn;
        fx = fn;
        g = gn;
        if (df <= 1e-12 * (1.0 + std::fabs(fx))) {
            res.converged = true;
            break;
        }
    }
    res.x = x;
    res.value = fx;
    res.iterations = it;
    return res;
}

}  // namespace tailrisk
