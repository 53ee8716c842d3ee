#pragma once

#include "evocaf/gp.hpp"

#include <Eigen/Dense>
#include <functional>

namespace evocaf::acquisition {

// Floors guarding degenerate posterior std and near-zero predicted cost.
constexpr double kSigmaFloor = 1e-9;
constexpr double kCostFloor = 1e-6;

// The information bundle handed to any acquisition function: historical data,
// the two surrogate models, and the budget ledger.
struct AfContext {
    Eigen::MatrixXd train_x; // t x d, unit-cube coordinates
    Eigen::VectorXd train_y; // original output units
    Eigen::VectorXd best_x;
    double best_y = 0.0; // max over train_y
    const gp::GpModel* obj_model = nullptr;
    const gp::GpModel* cost_model = nullptr;
    double budget_used = 0.0;
    double budget_total = 0.0;
    double budget_init = 0.0;
};

// Validates invariants and derives best_x / best_y from the data.
AfContext make_context(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
                       const gp::GpModel& obj_model, const gp::GpModel& cost_model,
                       double budget_used, double budget_total, double budget_init);

struct BatchUtility {
    Eigen::VectorXd values;
    Eigen::VectorXd per_point_costs; // cost-posterior mean per query point
};

struct EvolcafComponents {
    bool use_alpha1 = true;
    bool use_alpha2 = true;
    bool use_alpha3 = true;
};

// Per-point posterior summaries for a query batch. Acquisition values are pure
// functions of (ctx, inputs); the optimizer precomputes inputs once per batch
// so batched evaluations never re-enter the GP.
struct AfInputs {
    Eigen::MatrixXd xq;    // m x d
    Eigen::VectorXd mu;    // objective posterior mean, original units
    Eigen::VectorXd sigma; // objective posterior std
    Eigen::VectorXd cost;  // cost posterior mean
};

AfInputs make_af_inputs(const AfContext& ctx, const Eigen::MatrixXd& Xq);

using AcquisitionFn = std::function<Eigen::VectorXd(const AfContext&, const AfInputs&)>;

Eigen::VectorXd ei_values(const AfContext& ctx, const AfInputs& in);
Eigen::VectorXd eipu_values(const AfContext& ctx, const AfInputs& in);
Eigen::VectorXd eicool_values(const AfContext& ctx, const AfInputs& in);
Eigen::VectorXd evolcaf_values(const AfContext& ctx, const AfInputs& in,
                               const EvolcafComponents& comp);

BatchUtility eval_ei(const AfContext& ctx, const Eigen::MatrixXd& Xq);
BatchUtility eval_eipu(const AfContext& ctx, const Eigen::MatrixXd& Xq);
BatchUtility eval_eicool(const AfContext& ctx, const Eigen::MatrixXd& Xq);
BatchUtility eval_evolcaf(const AfContext& ctx, const Eigen::MatrixXd& Xq,
                          const EvolcafComponents& comp);

// Cost-cooling exponent, clamped to [0, 1].
double cooling_factor(const AfContext& ctx);

double std_normal_pdf(double z);
double std_normal_cdf(double z);

} // namespace evocaf::acquisition
