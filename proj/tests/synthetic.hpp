#pragma once

#include <random>
#include <vector>

#include "mascot/reward/reward_model.hpp"

namespace mascot::test {

// Winner = loser + step * u for a fixed unit direction u, so the linear scorer
// u . x orders every pair correctly.
inline std::vector<reward::FeaturePair> separable_pairs(std::size_t n, int dim, std::uint64_t seed,
                                                        double step = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    reward::Vector u(dim);
    for (int i = 0; i < dim; ++i) u[i] = n01(rng);
    u.normalize();
    std::vector<reward::FeaturePair> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        reward::Vector l(dim);
        for (int i = 0; i < dim; ++i) l[i] = n01(rng);
        out.emplace_back(l + step * u, l);
    }
    return out;
}

} // namespace mascot::test
