// thermal.hpp: thermal Fock-state occupations

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "icct/error.hpp"

namespace icct::thermal {

/// p_n = nbar^n / (nbar+1)^(n+1)
inline double occupation(double nbar, std::size_t n) {
    if (nbar == 0.0) return n == 0 ? 1.0 : 0.0;
    const double x = nbar / (nbar + 1.0);
    return std::pow(x, static_cast<double>(n)) / (nbar + 1.0);
}

/// d p_n / d nbar = p_n (n - nbar) / (nbar (nbar + 1))
inline double occupation_derivative(double nbar, std::size_t n) {
    if (nbar == 0.0) {
        if (n == 0) return -1.0;
        return n == 1 ? 1.0 : 0.0;
    }
    return occupation(nbar, n) * (static_cast<double>(n) - nbar) / (nbar * (nbar + 1.0));
}

/// Smallest n with (nbar/(nbar+1))^(n+1) < tail. The geometric tail beyond n
/// then carries less than `tail` of the probability.
inline std::size_t tail_cutoff(double nbar, double tail = 1e-10) {
    if (!(nbar >= 0.0) || !std::isfinite(nbar))
        throw Error(ErrorCode::InvalidInput, "mean phonon number must be finite and >= 0");
    if (nbar == 0.0) return 0;
    const double log_ratio = std::log(nbar / (nbar + 1.0));
    auto n = static_cast<std::size_t>(std::max(0.0, std::ceil(std::log(tail) / log_ratio) - 1.0));
    while (std::pow(nbar / (nbar + 1.0), static_cast<double>(n + 1)) >= tail) ++n;
    while (n > 0 && std::pow(nbar / (nbar + 1.0), static_cast<double>(n)) < tail) --n;
    return n;
}

inline std::vector<double> occupations(double nbar, std::size_t n_max) {
    std::vector<double> p(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) p[n] = occupation(nbar, n);
    return p;
}

}  // namespace icct::thermal
