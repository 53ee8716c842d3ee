#pragma once

#include "evocaf/acquisition.hpp"

#include <Eigen/Dense>
#include <cstdint>

namespace evocaf::acqopt {

struct AcqOptConfig {
    int n_raw = 100;      // quasi-random probes
    int n_restarts = 20;  // local-ascent starting points, <= n_raw
    int local_max_iters = 50;
    double local_tol = 1e-6;
    double fd_step = 1e-6;              // central-difference step, unit-cube units
    double softmax_temperature = 1.0;   // Boltzmann restart selection
    std::uint64_t rng_seed = 0;
};

// Draws n_raw probes, evaluates the AF once on the joint batch, then selects
// n_restarts points by softmax-weighted sampling without replacement over the
// standardized utilities.
Eigen::MatrixXd seed_restarts(const acquisition::AcquisitionFn& af,
                              const acquisition::AfContext& ctx, const AcqOptConfig& config);

struct MaximizeResult {
    Eigen::VectorXd x;      // inside the closed unit cube
    double utility = 0.0;
};

// Projected BFGS ascent from every restart with central-difference gradients.
// The AF is always evaluated on the joint restart batch, so batch-coupled
// terms see the whole set of trajectories. Returns the restart with the
// highest per-point utility; never below the best seeded utility.
MaximizeResult maximize(const acquisition::AcquisitionFn& af, const acquisition::AfContext& ctx,
                        const AcqOptConfig& config);

} // namespace evocaf::acqopt
