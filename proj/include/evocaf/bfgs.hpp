#pragma once

#include <Eigen/Dense>
#include <functional>

namespace evocaf::optim {

struct BfgsOptions {
    int max_iters = 50;
    double grad_tol = 1e-6;
    double fd_step = 1e-6; // central-difference step
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iters = 0;
    bool converged = false;
};

// Box-constrained BFGS ascent with central-difference gradients. Objective is
// maximized; iterates stay inside [lo, hi]. Non-finite objective values at the
// start point yield a result flagged not converged with value -inf.
BfgsResult bfgs_maximize_box(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi,
                             const BfgsOptions& opts);

// Standard inverse-Hessian BFGS update; skipped when curvature y's < 1e-12.
void bfgs_update(Eigen::MatrixXd& h_inv, const Eigen::VectorXd& s, const Eigen::VectorXd& y);

} // namespace evocaf::optim
