#include "evocaf/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

namespace evocaf::sampling {

Eigen::MatrixXd latin_hypercube(int n, int d, std::uint64_t seed) {
    Eigen::MatrixXd pts(n, d);
    if (n == 0 || d == 0) return pts;
    std::mt19937_64 rng(split_seed(seed, 0x1a7c9));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) {
            pts(i, j) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + unif(rng)) /
                        static_cast<double>(n);
        }
    }
    return pts;
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 over the pair; avoids correlated substreams from nearby seeds
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace evocaf::sampling
