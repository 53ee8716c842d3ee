#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace evocaf::sampling {

// Latin hypercube in [0,1]^d: each of the n per-dimension strata holds exactly
// one point. Deterministic per seed.
Eigen::MatrixXd latin_hypercube(int n, int d, std::uint64_t seed);

// Stateless stream split: child seed for (seed, stream). Used to derive
// independent deterministic generators per BO iteration, restart, etc.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace evocaf::sampling
