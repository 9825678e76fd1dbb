#pragma once

#include <Eigen/Dense>
#include <functional>

namespace tailrisk {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct NelderMeadOptions {
    int max_iter = 2000;
    double ftol = 1e-10;
    double step = 0.25;  // initial simplex edge
};

struct OptimResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

OptimResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                        const NelderMeadOptions& opt = {});

struct BfgsOptions {
    int max_iter = 200;
    double gtol = 1e-7;
    double fd_step = 1e-6;  // relative central-difference step
};

// Quasi-Newton polish with finite-difference gradients and Armijo backtracking.
OptimResult bfgs_minimize(const Objective& f, const Eigen::VectorXd& x0,
                          const BfgsOptions& opt = {});

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double h_rel = 1e-6);
Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double h_rel = 1e-4);

}  // namespace tailrisk
