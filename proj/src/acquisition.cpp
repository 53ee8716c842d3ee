#include "evocaf/acquisition.hpp"

#include "evocaf/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace evocaf::acquisition {

namespace {

double sample_variance(const Eigen::VectorXd& y) {
    const double mean = y.mean();
    return (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

double ei_point(double mu, double sigma, double best) {
    if (sigma <= kSigmaFloor) return std::max(0.0, mu - best);
    const double z = (mu - best) / sigma;
    return sigma * (std_normal_pdf(z) + z * std_normal_cdf(z));
}

} // namespace

double std_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

AfContext make_context(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
                       const gp::GpModel& obj_model, const gp::GpModel& cost_model,
                       double budget_used, double budget_total, double budget_init) {
    if (train_x.rows() < 1 || train_x.rows() != train_y.size())
        throw InvalidContext("context requires at least one observation with matching shapes");
    if (!(budget_total > budget_init) || budget_used < budget_init)
        throw InvalidContext("budget ledger must satisfy B_init <= B_used and B_total > B_init");
    AfContext ctx;
    ctx.train_x = train_x;
    ctx.train_y = train_y;
    Eigen::Index best_i = 0;
    ctx.best_y = train_y.maxCoeff(&best_i);
    ctx.best_x = train_x.row(best_i).transpose();
    ctx.obj_model = &obj_model;
    ctx.cost_model = &cost_model;
    ctx.budget_used = budget_used;
    ctx.budget_total = budget_total;
    ctx.budget_init = budget_init;
    return ctx;
}

AfInputs make_af_inputs(const AfContext& ctx, const Eigen::MatrixXd& Xq) {
    AfInputs in;
    in.xq = Xq;
    const gp::Posterior obj = gp::predict(*ctx.obj_model, Xq);
    const gp::Posterior cost = gp::predict(*ctx.cost_model, Xq);
    in.mu = obj.mean;
    in.sigma = obj.var.array().sqrt().matrix();
    in.cost = cost.mean;
    return in;
}

double cooling_factor(const AfContext& ctx) {
    const double alpha =
        (ctx.budget_total - ctx.budget_used) / (ctx.budget_total - ctx.budget_init);
    return std::min(1.0, std::max(0.0, alpha));
}

Eigen::VectorXd ei_values(const AfContext& ctx, const AfInputs& in) {
    Eigen::VectorXd out(in.mu.size());
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out(i) = ei_point(in.mu(i), in.sigma(i), ctx.best_y);
    return out;
}

Eigen::VectorXd eipu_values(const AfContext& ctx, const AfInputs& in) {
    const Eigen::VectorXd ei = ei_values(ctx, in);
    return (ei.array() / in.cost.array().max(kCostFloor)).matrix();
}

Eigen::VectorXd eicool_values(const AfContext& ctx, const AfInputs& in) {
    const double alpha = cooling_factor(ctx);
    // Exact boundary identities: alpha = 1 is EIpu, alpha = 0 is EI.
    if (alpha == 1.0) return eipu_values(ctx, in);
    if (alpha == 0.0) return ei_values(ctx, in);
    const Eigen::VectorXd ei = ei_values(ctx, in);
    return (ei.array() / in.cost.array().max(kCostFloor).pow(alpha)).matrix();
}

Eigen::VectorXd evolcaf_values(const AfContext& ctx, const AfInputs& in,
                               const EvolcafComponents& comp) {
    if (!(comp.use_alpha1 || comp.use_alpha2 || comp.use_alpha3))
        throw InvalidContext("at least one component must be enabled");
    if (comp.use_alpha1 && ctx.train_y.size() < 2)
        throw InvalidContext("variance of train_y requires at least two observations");

    const Eigen::Index m = in.mu.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);

    if (comp.use_alpha1) {
        const double s2y = sample_variance(ctx.train_y);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double s2 = in.sigma(i) * in.sigma(i) + s2y;
            const double s = std::sqrt(s2);
            const double z = (in.mu(i) - ctx.best_y) / s;
            const double ei_mod =
                (in.mu(i) - ctx.best_y) * std_normal_cdf(z) + s * std_normal_pdf(z);
            const double mi = std::max(0.0, 0.5 * (std::log(s2) - std::log(s2y)));
            out(i) += ei_mod * (1.0 - mi);
        }
    }
    if (comp.use_alpha2) {
        out.array() += -(ctx.budget_total - ctx.budget_used) * (-in.cost.array()).exp();
    }
    if (comp.use_alpha3) {
        // Batch-coupled term: mean over the batch of each point's distance to
        // its nearest observed location, added uniformly to every entry.
        double acc = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < ctx.train_x.rows(); ++j) {
                const double dist = (in.xq.row(i) - ctx.train_x.row(j)).norm();
                best = std::min(best, dist);
            }
            acc += best;
        }
        out.array() += acc / static_cast<double>(m);
    }
    return out;
}

namespace {

BatchUtility wrap(const AfContext& ctx, const Eigen::MatrixXd& Xq,
                  const std::function<Eigen::VectorXd(const AfContext&, const AfInputs&)>& fn) {
    const AfInputs in = make_af_inputs(ctx, Xq);
    BatchUtility u;
    u.values = fn(ctx, in);
    u.per_point_costs = in.cost;
    return u;
}

} // namespace

BatchUtility eval_ei(const AfContext& ctx, const Eigen::MatrixXd& Xq) {
    return wrap(ctx, Xq, &ei_values);
}

BatchUtility eval_eipu(const AfContext& ctx, const Eigen::MatrixXd& Xq) {
    return wrap(ctx, Xq, &eipu_values);
}

BatchUtility eval_eicool(const AfContext& ctx, const Eigen::MatrixXd& Xq) {
    return wrap(ctx, Xq, &eicool_values);
}

BatchUtility eval_evolcaf(const AfContext& ctx, const Eigen::MatrixXd& Xq,
                          const EvolcafComponents& comp) {
    return wrap(ctx, Xq, [&comp](const AfContext& c, const AfInputs& in) {
        return evolcaf_values(c, in, comp);
    });
}

} // namespace evocaf::acquisition
