#include "evocaf/bfgs.hpp"

#include <cmath>
#include <limits>

namespace evocaf::optim {

namespace {

Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = std::min(hi(i), std::max(lo(i), x(i)));
    return x;
}

Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi,
                                 double h) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double hp = std::min(h, hi(i) - x(i));
        const double hm = std::min(h, x(i) - lo(i));
        xp(i) = x(i) + hp;
        xm(i) = x(i) - hm;
        const double denom = hp + hm;
        g(i) = denom > 0.0 ? (f(xp) - f(xm)) / denom : 0.0;
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return g;
}

} // namespace

void bfgs_update(Eigen::MatrixXd& h_inv, const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-12)) return;
    const double rho = 1.0 / sy;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(s.size(), s.size());
    const Eigen::MatrixXd left = eye - rho * s * y.transpose();
    h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
}

BfgsResult bfgs_maximize_box(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi,
                             const BfgsOptions& opts) {
    const Eigen::Index d = x0.size();
    BfgsResult res;
    res.x = clamp_box(x0, lo, hi);
    res.value = f(res.x);
    if (!std::isfinite(res.value)) {
        res.value = -std::numeric_limits<double>::infinity();
        return res;
    }

    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd g = central_gradient(f, res.x, lo, hi, opts.fd_step);
    for (int it = 0; it < opts.max_iters; ++it) {
        res.iters = it + 1;
        // Projected-gradient stationarity test.
        const Eigen::VectorXd proj_step = clamp_box(res.x + g, lo, hi) - res.x;
        if (proj_step.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd dir = h_inv * g; // minimize -f: direction = H * g
        if (!dir.allFinite() || dir.dot(g) <= 0.0) {
            h_inv.setIdentity();
            dir = g;
        }

        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = res.value;
        for (int ls = 0; ls < 20; ++ls) {
            x_new = clamp_box(res.x + step * dir, lo, hi);
            const Eigen::VectorXd delta = x_new - res.x;
            if (delta.lpNorm<Eigen::Infinity>() < 1e-15) break;
            f_new = f(x_new);
            if (std::isfinite(f_new) && f_new >= res.value + 1e-4 * g.dot(delta)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.converged = true;
            break;
        }

        const Eigen::VectorXd g_new = central_gradient(f, x_new, lo, hi, opts.fd_step);
        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g - g_new; // BFGS on -f
        bfgs_update(h_inv, s, y);
        res.x = x_new;
        res.value = f_new;
        g = g_new;
    }
    return res;
}

} // namespace evocaf::optim
