// support.hpp: shared helpers for the test suites.

#pragma once

#include <cmath>
#include <random>
#include <vector>

namespace testing_support {

/// Gaussian random vector normalized to unit length.
inline std::vector<double> random_unit(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) {
        x = g(rng);
        s += x * x;
    }
    for (auto& x : v) x /= std::sqrt(s);
    return v;
}

}  // namespace testing_support
