#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace evocaf::bench {

// A synthetic test problem in maximization convention: classic minimization
// benchmarks are negated here, so f_star = max_x f(x). The cost surface peaks
// at the optimizer: c(x) = exp(-||x_hat - x_star_hat||) with both arguments in
// unit-cube coordinates.
struct BenchmarkInstance {
    std::string name;
    int dim = 0;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    Eigen::VectorXd x_star_unit; // known optimizer, unit-cube coordinates
    double f_star = 0.0;         // objective value at x_star (maximization)
    std::uint64_t seed = 0;      // drives the initial design, not the function
};

const std::vector<std::string>& supported_names();

BenchmarkInstance make_instance(const std::string& name, std::uint64_t seed);

// x in the instance's raw bounds. Throws DomainError when outside.
double eval_objective(const BenchmarkInstance& inst, const Eigen::VectorXd& x);
double eval_cost(const BenchmarkInstance& inst, const Eigen::VectorXd& x);

Eigen::VectorXd to_unit(const BenchmarkInstance& inst, const Eigen::VectorXd& x);
Eigen::VectorXd from_unit(const BenchmarkInstance& inst, const Eigen::VectorXd& u);

} // namespace evocaf::bench
