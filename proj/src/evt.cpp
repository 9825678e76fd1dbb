#include "tailrisk/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "tailrisk/optim.hpp"
#include "tailrisk/special.hpp"

namespace tailrisk {

namespace {
constexpr double kClamp = 1e-12;
constexpr double kXiLo = -0.5, kXiHi = 1.0;
}  // namespace

double gpd_loglik(double xi, double beta, const Eigen::Ref<const Eigen::VectorXd>& y) {
    const int n = static_cast<int>(y.size());
    if (!(beta > 0.0)) return -std::numeric_limits<double>::infinity();
    double ll = -n * std::log(beta);
    if (std::fabs(xi) < 1e-10) {
        ll -= y.sum() / beta;
        return ll;
    }
    for (int i = 0; i < n; ++i) {
        double w = 1.0 + xi * y[i] / beta;
        if (w <= 0.0) return -std::numeric_limits<double>::infinity();
        ll -= (1.0 + 1.0 / xi) * std::log(w);
    }
    return ll;
}

namespace {

// analytic score of the GPD log-likelihood in (beta, xi)
void gpd_score(double xi, double beta, const Eigen::Ref<const Eigen::VectorXd>& y, double* gb,
               double* gx) {
    *gb = 0.0;
    *gx = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        double w = 1.0 + xi * y[i] / beta;
        *gb += -1.0 / beta + (1.0 + xi) * y[i] / (beta * beta * w);
        *gx += std::log(w) / (xi * xi) - (1.0 + 1.0 / xi) * (y[i] / beta) / w;
    }
}

// Hosking-Wallis probability-weighted moments
void gpd_pwm(const Eigen::VectorXd& y, double* xi, double* beta) {
    std::vector<double> s(y.data(), y.data() + y.size());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double a0 = 0.0, a1 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        a0 += s[i];
        a1 += s[i] * (n - 1.0 - i) / (n - 1.0);
    }
    a0 /= n;
    a1 /= n;
    double denom = a0 - 2.0 * a1;
    if (denom <= 1e-12) {
        *xi = 0.2;
        *beta = std::max(a0, 1e-8);
        return;
    }
    *xi = std::clamp(2.0 - a0 / denom, kXiLo + 0.01, kXiHi - 0.01);
    *beta = std::max(2.0 * a0 * a1 / denom, 1e-8);
}

}  // namespace

GpdTail fit_gpd_mle(const Eigen::Ref<const Eigen::VectorXd>& exceedances) {
    const int n = static_cast<int>(exceedances.size());
    if (n < 30) throw std::invalid_argument("fit_gpd_mle: need at least 30 exceedances");
    if ((exceedances.array() < 0.0).any())
        throw std::invalid_argument("fit_gpd_mle: exceedances must be >= 0");

    double xi0, beta0;
    gpd_pwm(exceedances, &xi0, &beta0);

    Objective nll = [&](const Eigen::VectorXd& x) {
        double xi = x[1];
        if (xi <= kXiLo || xi >= kXiHi) return std::numeric_limits<double>::infinity();
        return -gpd_loglik(xi, std::exp(x[0]), exceedances);
    };
    Eigen::VectorXd x0(2);
    x0 << std::log(beta0), xi0;
    NelderMeadOptions nm;
    nm.max_iter = 400;
    nm.step = 0.1;
    OptimResult r = nelder_mead(nll, x0, nm);
    BfgsOptions bo;
    bo.max_iter = 80;
    bo.gtol = 1e-10;
    OptimResult pol = bfgs_minimize(nll, r.x, bo);
    if (pol.value < r.value) r = pol;

    GpdTail out;
    out.n_exceed = n;
    double f_pwm = nll(x0);
    if (std::isfinite(r.value) && r.value <= f_pwm) {
        out.beta = std::exp(r.x[0]);
        out.xi = r.x[1];
        out.mle_converged = true;
    } else {
        out.beta = beta0;
        out.xi = xi0;
        out.mle_converged = false;
    }

    // Newton refinement on the analytic score so the MLE stationarity holds
    // to near machine precision (safeguarded; keeps the incumbent on failure)
    if (std::fabs(out.xi) > 1e-8) {
        double b = out.beta, x = out.xi;
        double ll = gpd_loglik(x, b, exceedances);
        for (int it = 0; it < 30; ++it) {
            double gb, gx;
            gpd_score(x, b, exceedances, &gb, &gx);
            if (std::sqrt(gb * gb + gx * gx) < 1e-9 * n) break;
            double hb = 1e-6 * b, hx = 1e-7 * std::max(std::fabs(x), 1e-3);
            double gb1, gx1, gb2, gx2;
            gpd_score(x, b + hb, exceedances, &gb1, &gx1);
            gpd_score(x + hx, b, exceedances, &gb2, &gx2);
            Eigen::Matrix2d jac;
            jac << (gb1 - gb) / hb, (gb2 - gb) / hx, (gx1 - gx) / hb, (gx2 - gx) / hx;
            Eigen::Vector2d step = jac.fullPivLu().solve(Eigen::Vector2d(-gb, -gx));
            if (!step.allFinite()) break;
            double damp = 1.0;
            bool moved = false;
            for (int half = 0; half < 20; ++half, damp *= 0.5) {
                double bn = b + damp * step[0];
                double xn = x + damp * step[1];
                if (!(bn > 0.0) || xn <= kXiLo || xn >= kXiHi) continue;
                double lln = gpd_loglik(xn, bn, exceedances);
                if (lln >= ll - 1e-9 * std::fabs(ll)) {
                    b = bn;
                    x = xn;
                    ll = lln;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        if (gpd_loglik(x, b, exceedances) >= gpd_loglik(out.xi, out.beta, exceedances)) {
            out.beta = b;
            out.xi = x;
        }
    }
    return out;
}

SemiParametricMargin fit_margin(const Eigen::Ref<const Eigen::VectorXd>& residuals,
                                double tail_fraction) {
    const int n = static_cast<int>(residuals.size());
    if (n < 300) throw std::invalid_argument("fit_margin: need at least 300 residuals");
    if (!(tail_fraction > 0.0 && tail_fraction < 0.5))
        throw std::invalid_argument("fit_margin: tail_fraction must be in (0, 0.5)");
    if (!residuals.allFinite()) throw std::invalid_argument("fit_margin: non-finite residuals");

    std::vector<double> zs(residuals.data(), residuals.data() + n);
    std::sort(zs.begin(), zs.end());
    const int k = static_cast<int>(std::floor(tail_fraction * n));
    if (k < 30) throw std::invalid_argument("fit_margin: fewer than 30 tail exceedances");

    const double u_lo = zs[k];
    const double u_hi = zs[n - 1 - k];
    if (!(u_lo < u_hi)) throw std::invalid_argument("fit_margin: degenerate sample");

    // strict inequality decides tail membership, so ties at the threshold
    // stay in the interior
    const int n_lo = static_cast<int>(std::lower_bound(zs.begin(), zs.end(), u_lo) - zs.begin());
    const int n_hi = static_cast<int>(zs.end() - std::upper_bound(zs.begin(), zs.end(), u_hi));

    Eigen::VectorXd exc_lo(n_lo), exc_hi(n_hi);
    for (int i = 0; i < n_lo; ++i) exc_lo[i] = u_lo - zs[i];  // reflected lower tail
    for (int i = 0; i < n_hi; ++i) exc_hi[i] = zs[n - 1 - i] - u_hi;

    SemiParametricMargin m;
    m.tail_fraction = tail_fraction;
    m.lower = fit_gpd_mle(exc_lo);
    m.lower.threshold = u_lo;
    m.lower.n_total = n;
    m.upper = fit_gpd_mle(exc_hi);
    m.upper.threshold = u_hi;
    m.upper.n_total = n;

    // Gaussian-kernel ECDF on a fixed grid, Silverman bandwidth
    const double mean = residuals.mean();
    const double sd = std::sqrt((residuals.array() - mean).square().sum() / (n - 1));
    const double iqr = zs[static_cast<int>(0.75 * n)] - zs[static_cast<int>(0.25 * n)];
    const double h = 0.9 * std::min(sd, iqr / 1.34) * std::pow(static_cast<double>(n), -0.2);

    const int grid_n = 512;
    m.grid_z.resize(grid_n);
    m.grid_cdf.resize(grid_n);
    Eigen::VectorXd raw(grid_n);
    for (int g = 0; g < grid_n; ++g) {
        double z = u_lo + (u_hi - u_lo) * g / (grid_n - 1.0);
        m.grid_z[g] = z;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += normal_cdf((z - zs[i]) / h);
        raw[g] = acc / n;
    }
    // affine rescale so the boundary values are hit exactly
    const double t_lo = static_cast<double>(n_lo) / n;
    const double t_hi = 1.0 - static_cast<double>(n_hi) / n;
    const double b = (t_hi - t_lo) / (raw[grid_n - 1] - raw[0]);
    for (int g = 0; g < grid_n; ++g) m.grid_cdf[g] = t_lo + b * (raw[g] - raw[0]);
    m.grid_cdf[0] = t_lo;
    m.grid_cdf[grid_n - 1] = t_hi;
    for (int g = 1; g < grid_n; ++g)  // guard against flat spots at double resolution
        if (m.grid_cdf[g] <= m.grid_cdf[g - 1])
            m.grid_cdf[g] = m.grid_cdf[g - 1] + 1e-15;
    return m;
}

namespace {

double gpd_survival_factor(double xi, double beta, double y) {
    // (1 + xi y / beta)^(-1/xi), exponential form in the xi -> 0 limit
    if (std::fabs(xi) < 1e-10) return std::exp(-y / beta);
    double w = 1.0 + xi * y / beta;
    if (w <= 0.0) return 0.0;  // beyond the finite endpoint (xi < 0)
    return std::exp(-std::log(w) / xi);
}

double gpd_tail_quantile(double xi, double beta, double ratio) {
    // solves ratio = (1 + xi y / beta)^(-1/xi) for y, ratio in (0,1]
    if (std::fabs(xi) < 1e-10) return -beta * std::log(ratio);
    return beta / xi * std::expm1(-xi * std::log(ratio));
}

}  // namespace

double margin_cdf(const SemiParametricMargin& m, double z) {
    if (!std::isfinite(z)) throw std::domain_error("margin_cdf: non-finite argument");
    const double t_lo = m.grid_cdf[0];
    const double t_hi = m.grid_cdf[m.grid_cdf.size() - 1];
    double u;
    if (z < m.lower.threshold) {
        u = t_lo * gpd_survival_factor(m.lower.xi, m.lower.beta, m.lower.threshold - z);
    } else if (z > m.upper.threshold) {
        u = 1.0 - (1.0 - t_hi) * gpd_survival_factor(m.upper.xi, m.upper.beta,
                                                     z - m.upper.threshold);
    } else {
        const auto& zg = m.grid_z;
        int hi = static_cast<int>(std::lower_bound(zg.data(), zg.data() + zg.size(), z) -
                                  zg.data());
        if (hi == 0) {
            u = m.grid_cdf[0];
        } else {
            double w = (z - zg[hi - 1]) / (zg[hi] - zg[hi - 1]);
            u = m.grid_cdf[hi - 1] + w * (m.grid_cdf[hi] - m.grid_cdf[hi - 1]);
        }
    }
    return std::min(std::max(u, kClamp), 1.0 - kClamp);
}

double margin_quantile(const SemiParametricMargin& m, double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("margin_quantile: u must be in (0,1)");
    const double t_lo = m.grid_cdf[0];
    const double t_hi = m.grid_cdf[m.grid_cdf.size() - 1];
    if (u < t_lo) return m.lower.threshold - gpd_tail_quantile(m.lower.xi, m.lower.beta, u / t_lo);
    if (u > t_hi)
        return m.upper.threshold +
               gpd_tail_quantile(m.upper.xi, m.upper.beta, (1.0 - u) / (1.0 - t_hi));
    const auto& gc = m.grid_cdf;
    int hi = static_cast<int>(std::lower_bound(gc.data(), gc.data() + gc.size(), u) - gc.data());
    if (hi == 0) return m.grid_z[0];
    double w = (u - gc[hi - 1]) / (gc[hi] - gc[hi - 1]);
    return m.grid_z[hi - 1] + w * (m.grid_z[hi] - m.grid_z[hi - 1]);
}

std::string margin_to_json_string(const SemiParametricMargin& m) {
    nlohmann::ordered_json j;
    j["xi_l"] = m.lower.xi;
    j["beta_l"] = m.lower.beta;
    j["u_l"] = m.lower.threshold;
    j["xi_r"] = m.upper.xi;
    j["beta_r"] = m.upper.beta;
    j["u_r"] = m.upper.threshold;
    j["tail_fraction"] = m.tail_fraction;
    j["n_total"] = m.lower.n_total;
    j["n_exceed_l"] = m.lower.n_exceed;
    j["n_exceed_r"] = m.upper.n_exceed;
    j["mle_converged_l"] = m.lower.mle_converged;
    j["mle_converged_r"] = m.upper.mle_converged;
    nlohmann::ordered_json grid;
    grid["z"] = std::vector<double>(m.grid_z.data(), m.grid_z.data() + m.grid_z.size());
    grid["cdf"] = std::vector<double>(m.grid_cdf.data(), m.grid_cdf.data() + m.grid_cdf.size());
    j["interior_grid"] = std::move(grid);
    return j.dump();
}

SemiParametricMargin margin_from_json_string(const std::string& text) {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(text);
    SemiParametricMargin m;
    m.lower.xi = j.at("xi_l").get<double>();
    m.lower.beta = j.at("beta_l").get<double>();
    m.lower.threshold = j.at("u_l").get<double>();
    m.upper.xi = j.at("xi_r").get<double>();
    m.upper.beta = j.at("beta_r").get<double>();
    m.upper.threshold = j.at("u_r").get<double>();
    m.tail_fraction = j.at("tail_fraction").get<double>();
    m.lower.n_total = m.upper.n_total = j.value("n_total", 0);
    m.lower.n_exceed = j.value("n_exceed_l", 0);
    m.upper.n_exceed = j.value("n_exceed_r", 0);
    m.lower.mle_converged = j.value("mle_converged_l", true);
    m.upper.mle_converged = j.value("mle_converged_r", true);
    auto z = j.at("interior_grid").at("z").get<std::vector<double>>();
    auto c = j.at("interior_grid").at("cdf").get<std::vector<double>>();
    m.grid_z = Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    m.grid_cdf = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    return m;
}

}  // namespace tailrisk
