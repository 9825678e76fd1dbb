#pragma once

#include <Eigen/Dense>

namespace tailrisk {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
    LpStatus status = LpStatus::optimal;
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd row_duals;  // simplex multipliers at the optimum
    int iterations = 0;
};

// Dense two-phase primal simplex with bounded variables:
//   min c.x  s.t.  A x = b,  lo <= x <= up
// Designed for few rows and many columns (the CVaR dual has d+1 rows and one
// column per scenario). Bland's rule kicks in after a run of degenerate
// pivots, so cycling terminates.
LpResult solve_lp_bounded(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& c, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& up, int max_iter = 200000);

}  // namespace tailrisk
