#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace evocaf::gp {

enum class KernelFamily { matern52_ard, rbf_ard };

struct GpConfig {
    KernelFamily kernel_family = KernelFamily::matern52_ard;
    double noise_floor = 1e-8; // variance, standardized output units
    bool standardize_outputs = true;
    bool normalize_inputs = false; // the BO loop already works in the unit cube
    int hyperopt_restarts = 5;
    int hyperopt_max_iters = 50;
    // Off: pure marginal-likelihood fit with noise pinned at noise_floor.
    // On: the surrogate-toolchain defaults — Gamma hyperpriors on lengthscales
    // and signal variance plus a fitted noise term bounded below by
    // noise_floor. The BO loop enables both.
    bool map_priors = false;
    bool optimize_noise = false;
};

struct KernelParams {
    Eigen::VectorXd lengthscales; // per input dimension
    double signal_var = 1.0;
};

// Immutable after fit; safe to share across threads for concurrent predict.
struct GpModel {
    Eigen::MatrixXd train_x; // normalized inputs
    Eigen::VectorXd train_y; // standardized outputs
    KernelParams kernel_params;
    double noise_var = 1e-8;
    Eigen::MatrixXd chol;  // lower factor of K_XX + noise_var * I
    Eigen::VectorXd alpha; // (K_XX + noise_var * I)^-1 train_y
    double y_mean = 0.0;   // output standardization transform
    double y_std = 1.0;
    Eigen::VectorXd x_lo; // input normalization transform (identity when disabled)
    Eigen::VectorXd x_hi;
    KernelFamily kernel_family = KernelFamily::matern52_ard;
};

struct Posterior {
    Eigen::VectorXd mean; // original output units
    Eigen::VectorXd var;  // >= 0, original units squared
};

// Fits hyperparameters by multi-restart box-BFGS on the log marginal
// likelihood. Deterministic for fixed (X, y, config).
GpModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpConfig& config);

// Builds a model with the given hyperparameters, skipping optimization.
GpModel make_model(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const KernelParams& params, const GpConfig& config);

Posterior predict(const GpModel& model, const Eigen::MatrixXd& Xq);

double log_marginal_likelihood(const GpModel& model);

// Kernel matrix between row sets A and B under the model's family/parameters.
Eigen::MatrixXd kernel_matrix(KernelFamily family, const KernelParams& params,
                              const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

} // namespace evocaf::gp
