#include "evocaf/gp.hpp"

#include "evocaf/bfgs.hpp"
#include "evocaf/errors.hpp"
#include "evocaf/sampling.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace evocaf::gp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453; // log(2*pi)

// Hard box for hyperparameter search, log10 units.
constexpr double kLsLo = 1e-2, kLsHi = 1e2;
constexpr double kSvLo = 1e-3, kSvHi = 1e3;

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi) {
    Eigen::MatrixXd out = X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double width = hi(j) - lo(j);
        out.col(j) = (X.col(j).array() - lo(j)) / (width > 0.0 ? width : 1.0);
    }
    return out;
}

struct CholResult {
    Eigen::MatrixXd L;
    double jitter = 0.0;
};

CholResult robust_cholesky(const Eigen::MatrixXd& K, double noise_var) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += noise_var;
    // Jitter ladder 1e-8 -> 1e-4, multiplicative x10.
    for (double jitter : {0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4}) {
        Eigen::MatrixXd Aj = A;
        Aj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(Aj);
        if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    }
    throw NumericalFailure("Cholesky factorization failed after max jitter escalation");
}

double lml_for(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, KernelFamily family,
               const KernelParams& params, double noise_var) {
    const Eigen::MatrixXd K = kernel_matrix(family, params, X, X);
    CholResult ch;
    try {
        ch = robust_cholesky(K, noise_var);
    } catch (const NumericalFailure&) {
        return -std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd alpha =
        ch.L.transpose().triangularView<Eigen::Upper>().solve(
            ch.L.triangularView<Eigen::Lower>().solve(y));
    const double n = static_cast<double>(y.size());
    return -0.5 * y.dot(alpha) - ch.L.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
}

GpModel assemble(const Eigen::MatrixXd& Xn, const Eigen::VectorXd& ys, const KernelParams& params,
                 double noise_var, const GpConfig& config, double y_mean, double y_std,
                 const Eigen::VectorXd& x_lo, const Eigen::VectorXd& x_hi) {
    GpModel m;
    m.train_x = Xn;
    m.train_y = ys;
    m.kernel_params = params;
    m.kernel_family = config.kernel_family;
    m.y_mean = y_mean;
    m.y_std = y_std;
    m.x_lo = x_lo;
    m.x_hi = x_hi;
    const Eigen::MatrixXd K = kernel_matrix(config.kernel_family, params, Xn, Xn);
    const CholResult ch = robust_cholesky(K, noise_var);
    m.noise_var = noise_var + ch.jitter;
    m.chol = ch.L;
    m.alpha = ch.L.transpose().triangularView<Eigen::Upper>().solve(
        ch.L.triangularView<Eigen::Lower>().solve(ys));
    return m;
}

} // namespace

Eigen::MatrixXd kernel_matrix(KernelFamily family, const KernelParams& params,
                              const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    const Eigen::Index na = A.rows(), nb = B.rows(), d = A.cols();
    Eigen::MatrixXd As = A, Bs = B;
    for (Eigen::Index j = 0; j < d; ++j) {
        As.col(j) /= params.lengthscales(j);
        Bs.col(j) /= params.lengthscales(j);
    }
    Eigen::MatrixXd r2 = -2.0 * As * Bs.transpose();
    r2.colwise() += As.rowwise().squaredNorm();
    r2.rowwise() += Bs.rowwise().squaredNorm().transpose();
    r2 = r2.cwiseMax(0.0);

    Eigen::MatrixXd K(na, nb);
    if (family == KernelFamily::rbf_ard) {
        K = (params.signal_var * (-0.5 * r2.array()).exp()).matrix();
    } else {
        const double sqrt5 = std::sqrt(5.0);
        const Eigen::ArrayXXd r = r2.array().sqrt();
        K = (params.signal_var *
             ((1.0 + sqrt5 * r + (5.0 / 3.0) * r2.array()) * (-sqrt5 * r).exp()))
                .matrix();
    }
    return K;
}

GpModel make_model(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelParams& params,
                   const GpConfig& config) {
    if (X.rows() != y.size() || X.rows() < 1)
        throw InvalidData("training set must be non-empty with matching shapes");
    if (!X.allFinite() || !y.allFinite()) throw InvalidData("non-finite training data");
    if (params.lengthscales.size() != X.cols())
        throw ShapeError("lengthscale count must match input dimension");
    if ((params.lengthscales.array() <= 0.0).any() || !(params.signal_var > 0.0))
        throw InvalidData("kernel parameters must be positive");

    Eigen::VectorXd x_lo = Eigen::VectorXd::Zero(X.cols());
    Eigen::VectorXd x_hi = Eigen::VectorXd::Ones(X.cols());
    Eigen::MatrixXd Xn = X;
    if (config.normalize_inputs) {
        x_lo = X.colwise().minCoeff();
        x_hi = X.colwise().maxCoeff();
        Xn = normalize_rows(X, x_lo, x_hi);
    }

    double y_mean = 0.0, y_std = 1.0;
    Eigen::VectorXd ys = y;
    if (config.standardize_outputs) {
        y_mean = y.mean();
        const double var =
            y.size() > 1 ? (y.array() - y_mean).square().sum() / static_cast<double>(y.size() - 1)
                         : 0.0;
        y_std = var > 1e-24 ? std::sqrt(var) : 1.0;
        ys = (y.array() - y_mean) / y_std;
    }
    return assemble(Xn, ys, params, config.noise_floor, config, y_mean, y_std, x_lo, x_hi);
}

GpModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpConfig& config) {
    if (X.rows() != y.size() || X.rows() < 1)
        throw InvalidData("training set must be non-empty with matching shapes");
    if (!X.allFinite() || !y.allFinite()) throw InvalidData("non-finite training data");
    if (config.hyperopt_restarts < 1) throw InvalidData("hyperopt_restarts must be >= 1");
    if (!(config.noise_floor > 0.0)) throw InvalidData("noise_floor must be > 0");

    const Eigen::Index d = X.cols();
    Eigen::VectorXd x_lo = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd x_hi = Eigen::VectorXd::Ones(d);
    Eigen::MatrixXd Xn = X;
    if (config.normalize_inputs) {
        x_lo = X.colwise().minCoeff();
        x_hi = X.colwise().maxCoeff();
        Xn = normalize_rows(X, x_lo, x_hi);
    }

    double y_mean = 0.0, y_std = 1.0;
    Eigen::VectorXd ys = y;
    if (config.standardize_outputs) {
        y_mean = y.mean();
        const double var =
            y.size() > 1 ? (y.array() - y_mean).square().sum() / static_cast<double>(y.size() - 1)
                         : 0.0;
        y_std = var > 1e-24 ? std::sqrt(var) : 1.0;
        ys = (y.array() - y_mean) / y_std;
    }

    // theta = [log ls_1..log ls_d, log sv] plus log noise when optimized.
    const Eigen::Index n_params = d + 1 + (config.optimize_noise ? 1 : 0);
    auto unpack = [d](const Eigen::VectorXd& theta) {
        KernelParams p;
        p.lengthscales = theta.head(d).array().exp();
        p.signal_var = std::exp(theta(d));
        return p;
    };
    auto noise_of = [&](const Eigen::VectorXd& theta) {
        return config.optimize_noise ? std::exp(theta(d + 1)) : config.noise_floor;
    };
    auto objective = [&](const Eigen::VectorXd& theta) {
        double value =
            lml_for(Xn, ys, config.kernel_family, unpack(theta), noise_of(theta));
        if (config.map_priors) {
            // Gamma log-densities: lengthscale Gamma(3, 6), signal variance
            // Gamma(2, 0.15). Noise gets only an exponential shrink so it can
            // vanish where dense data resolves fine structure.
            for (Eigen::Index j = 0; j < d; ++j) {
                const double ls = std::exp(theta(j));
                value += 2.0 * std::log(ls) - 6.0 * ls;
            }
            const double sv = std::exp(theta(d));
            value += std::log(sv) - 0.15 * sv;
            if (config.optimize_noise) {
                const double nv = std::exp(theta(d + 1));
                value += -0.05 * nv;
            }
        }
        return value;
    };

    Eigen::VectorXd lo(n_params), hi(n_params);
    lo.head(d).setConstant(std::log(kLsLo));
    hi.head(d).setConstant(std::log(kLsHi));
    lo(d) = std::log(kSvLo);
    hi(d) = std::log(kSvHi);
    if (config.optimize_noise) {
        lo(d + 1) = std::log(config.noise_floor);
        hi(d + 1) = std::log(1e-2);
    }

    optim::BfgsOptions opts;
    opts.max_iters = config.hyperopt_max_iters;
    opts.grad_tol = 1e-5;
    opts.fd_step = 1e-5;

    // Restart 0 is a fixed default; the rest are log-uniform draws from a
    // fixed-seed stream so fit is deterministic for given inputs.
    std::mt19937_64 rng(sampling::split_seed(0x6f17ULL, static_cast<std::uint64_t>(X.rows())));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    double best_value = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta(n_params);
    best_theta.head(d).setConstant(std::log(0.3));
    best_theta(d) = 0.0;
    if (config.optimize_noise) best_theta(d + 1) = std::log(std::max(config.noise_floor, 1e-4));
    for (int r = 0; r < config.hyperopt_restarts; ++r) {
        Eigen::VectorXd theta0(n_params);
        if (r == 0) {
            theta0 = best_theta;
        } else {
            for (Eigen::Index j = 0; j < d; ++j)
                theta0(j) = std::log(0.05) + unif(rng) * (std::log(2.0) - std::log(0.05));
            theta0(d) = std::log(0.1) + unif(rng) * (std::log(10.0) - std::log(0.1));
            if (config.optimize_noise)
                theta0(d + 1) = std::log(config.noise_floor) +
                                unif(rng) * (std::log(0.1) - std::log(config.noise_floor));
        }
        const optim::BfgsResult res = optim::bfgs_maximize_box(objective, theta0, lo, hi, opts);
        if (res.value > best_value) {
            best_value = res.value;
            best_theta = res.x;
        }
    }
    if (!std::isfinite(best_value))
        throw NumericalFailure("hyperparameter optimization found no finite log marginal likelihood");

    return assemble(Xn, ys, unpack(best_theta), noise_of(best_theta), config, y_mean, y_std,
                    x_lo, x_hi);
}

Posterior predict(const GpModel& model, const Eigen::MatrixXd& Xq) {
    if (Xq.cols() != model.train_x.cols())
        throw ShapeError("query dimension " + std::to_string(Xq.cols()) +
                         " does not match model dimension " + std::to_string(model.train_x.cols()));
    if (!Xq.allFinite()) throw InvalidData("non-finite query points");

    Posterior post;
    if (Xq.rows() == 0) {
        post.mean.resize(0);
        post.var.resize(0);
        return post;
    }
    const Eigen::MatrixXd Qn = normalize_rows(Xq, model.x_lo, model.x_hi);
    const Eigen::MatrixXd Kqx =
        kernel_matrix(model.kernel_family, model.kernel_params, Qn, model.train_x);
    post.mean = Kqx * model.alpha;
    const Eigen::MatrixXd V =
        model.chol.triangularView<Eigen::Lower>().solve(Kqx.transpose()); // n x m
    post.var = (model.kernel_params.signal_var -
                V.colwise().squaredNorm().transpose().array())
                   .cwiseMax(0.0)
                   .matrix();

    post.mean = (model.y_mean + model.y_std * post.mean.array()).matrix();
    post.var *= model.y_std * model.y_std;
    return post;
}

double log_marginal_likelihood(const GpModel& model) {
    const double n = static_cast<double>(model.train_y.size());
    return -0.5 * model.train_y.dot(model.alpha) - model.chol.diagonal().array().log().sum() -
           0.5 * n * kLog2Pi;
}

} // namespace evocaf::gp
