#include "tailrisk/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace tailrisk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-9;
constexpr double kCostTol = 1e-9;

struct Tableau {
    const Eigen::MatrixXd& a;
    const Eigen::VectorXd& b;
    Eigen::VectorXd lo, up, cost;
    std::vector<int> basis;          // m basic column indices
    std::vector<char> at_upper;      // nonbasic position flag, per column
    std::vector<char> is_basic;      // per column
    Eigen::VectorXd xb;              // basic values
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;

    int m() const { return static_cast<int>(a.rows()); }
    int n() const { return static_cast<int>(a.cols()); }

    double nb_value(int j) const { return at_upper[j] ? up[j] : lo[j]; }

    void refactor() {
        Eigen::MatrixXd bmat(m(), m());
        for (int i = 0; i < m(); ++i) bmat.col(i) = a.col(basis[i]);
        lu.compute(bmat);
    }

    void recompute_xb() {
        Eigen::VectorXd rhs = b;
        for (int j = 0; j < n(); ++j) {
            if (is_basic[j]) continue;
            double v = nb_value(j);
            if (v != 0.0) rhs -= a.col(j) * v;
        }
        xb = lu.solve(rhs);
    }

    Eigen::VectorXd duals() const {
        Eigen::VectorXd cb(m());
        for (int i = 0; i < m(); ++i) cb[i] = cost[basis[i]];
        return lu.transpose().solve(cb);
    }

    double objective() const {
        double v = 0.0;
        for (int i = 0; i < m(); ++i) v += cost[basis[i]] * xb[i];
        for (int j = 0; j < n(); ++j)
            if (!is_basic[j]) v += cost[j] * nb_value(j);
        return v;
    }
};

// One simplex phase on the prepared tableau. Returns false on iteration limit.
bool run_simplex(Tableau& t, int max_iter, int* used_iters) {
    const int m = t.m(), n = t.n();
    int degenerate_streak = 0;
    for (int it = 0; it < max_iter; ++it) {
        ++*used_iters;
        t.refactor();
        t.recompute_xb();
        Eigen::VectorXd pi = t.duals();

        const bool bland = degenerate_streak > 4 * (m + 4);
        int enter = -1;
        double best = kCostTol;
        int sigma = 1;
        for (int j = 0; j < n; ++j) {
            if (t.is_basic[j]) continue;
            if (t.lo[j] == t.up[j]) continue;  // fixed (retired artificials)
            double d = t.cost[j] - pi.dot(t.a.col(j));
            if (!t.at_upper[j] && d < -best) {
                enter = j;
                sigma = 1;
                if (bland) break;
                best = -d;
            } else if (t.at_upper[j] && d > best) {
                enter = j;
                sigma = -1;
                if (bland) break;
                best = d;
            }
        }
        if (enter < 0) return true;  // optimal for this phase

        Eigen::VectorXd u = t.lu.solve(t.a.col(enter)) * sigma;

        // ratio test: entering moves by step >= 0 in direction sigma
        double step = t.up[enter] - t.lo[enter];  // bound-flip distance
        int leave = -1;
        bool leave_to_upper = false;
        for (int i = 0; i < m; ++i) {
            int bj = t.basis[i];
            if (u[i] > kFeasTol) {
                double s = (t.xb[i] - t.lo[bj]) / u[i];
                if (s < step - 1e-12) {
                    step = s;
                    leave = i;
                    leave_to_upper = false;
                }
            } else if (u[i] < -kFeasTol) {
                if (t.up[bj] == kInf) continue;
                double s = (t.xb[i] - t.up[bj]) / u[i];
                if (s < step - 1e-12) {
                    step = s;
                    leave = i;
                    leave_to_upper = true;
                }
            }
        }
        if (step == kInf) return true;  // unbounded; caller inspects objective

        step = std::max(step, 0.0);
        degenerate_streak = step < 1e-12 ? degenerate_streak + 1 : 0;

        if (leave < 0) {
            // entering variable flips to its other bound
            t.at_upper[enter] = !t.at_upper[enter];
            continue;
        }
        int out = t.basis[leave];
        t.is_basic[out] = 0;
        t.at_upper[out] = leave_to_upper ? 1 : 0;
        t.basis[leave] = enter;
        t.is_basic[enter] = 1;
        // entering value is tracked implicitly through recompute_xb
    }
    return false;
}

}  // namespace

LpResult solve_lp_bounded(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& c, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& up, int max_iter) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    if (b.size() != m || c.size() != n || lo.size() != n || up.size() != n)
        throw std::invalid_argument("solve_lp_bounded: dimension mismatch");
    for (int j = 0; j < n; ++j) {
        if (!(lo[j] <= up[j])) throw std::invalid_argument("solve_lp_bounded: empty bound box");
        if (lo[j] == -kInf && up[j] == kInf)
            throw std::invalid_argument("solve_lp_bounded: free variables must be split");
    }

    // augmented system with one artificial per row
    Eigen::MatrixXd aa(m, n + m);
    aa.leftCols(n) = a;
    Eigen::VectorXd residual = b;
    std::vector<char> start_upper(n, 0);
    for (int j = 0; j < n; ++j) {
        double v = lo[j] != -kInf ? lo[j] : up[j];
        start_upper[j] = lo[j] == -kInf ? 1 : 0;
        if (v != 0.0) residual -= a.col(j) * v;
    }
    for (int i = 0; i < m; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        e[i] = residual[i] >= 0.0 ? 1.0 : -1.0;
        aa.col(n + i) = e;
    }

    Tableau t{aa, b, Eigen::VectorXd(n + m), Eigen::VectorXd(n + m),
              Eigen::VectorXd(n + m), {}, {}, {}, {}, {}};
    t.lo.head(n) = lo;
    t.up.head(n) = up;
    t.lo.tail(m).setZero();
    t.up.tail(m).setConstant(kInf);
    t.cost.setZero();
    t.cost.tail(m).setOnes();
    t.at_upper.assign(n + m, 0);
    for (int j = 0; j < n; ++j) t.at_upper[j] = start_upper[j];
    t.is_basic.assign(n + m, 0);
    t.basis.resize(m);
    for (int i = 0; i < m; ++i) {
        t.basis[i] = n + i;
        t.is_basic[n + i] = 1;
    }

    LpResult res;
    res.iterations = 0;

    // phase 1
    if (!run_simplex(t, max_iter, &res.iterations)) {
        res.status = LpStatus::iteration_limit;
        return res;
    }
    t.refactor();
    t.recompute_xb();
    if (t.objective() > 1e-7 * (1.0 + b.cwiseAbs().maxCoeff())) {
        res.status = LpStatus::infeasible;
        return res;
    }
    // retire artificials: fix to zero so they can never carry value again
    for (int i = 0; i < m; ++i) {
        t.lo[n + i] = 0.0;
        t.up[n + i] = 0.0;
        if (!t.is_basic[n + i]) t.at_upper[n + i] = 0;
    }

    // phase 2
    t.cost.setZero();
    t.cost.head(n) = c;
    if (!run_simplex(t, max_iter, &res.iterations)) {
        res.status = LpStatus::iteration_limit;
        return res;
    }
    t.refactor();
    t.recompute_xb();

    // detect unboundedness: an improving column with an infinite ratio leaves
    // run_simplex via the step == inf branch; re-check optimality here
    Eigen::VectorXd pi = t.duals();
    for (int j = 0; j < n; ++j) {
        if (t.is_basic[j] || t.lo[j] == t.up[j]) continue;
        double d = c[j] - pi.dot(a.col(j));
        bool improving = (!t.at_upper[j] && d < -1e-7) || (t.at_upper[j] && d > 1e-7);
        if (improving) {
            res.status = LpStatus::unbounded;
            return res;
        }
    }

    res.x = Eigen::VectorXd(n);
    for (int j = 0; j < n; ++j)
        if (!t.is_basic[j]) res.x[j] = t.nb_value(j);
    for (int i = 0; i < m; ++i)
        if (t.basis[i] < n) res.x[t.basis[i]] = t.xb[i];
    res.value = c.dot(res.x);
    res.row_duals = pi;
    res.status = LpStatus::optimal;
    return res;
}

}  // namespace tailrisk
