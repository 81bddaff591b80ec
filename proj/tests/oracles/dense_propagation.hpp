// dense_propagation.hpp: brute-force propagation on the spin register times a
// truncated Fock space, with no use of conserved quantities.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using cd = std::complex<double>;

/// Index of |spins, phonons> with spins as a bit mask (bit set = excited).
inline std::size_t dense_index(std::size_t spins, std::size_t phonons, std::size_t fock) { return spins * fock + phonons; }

/// H/g for red (J+ a + h.c.) or blue (J+ a^dag + h.c.) sidebands, or for the
/// bichromatic drive on one ion, sigma_x (a + a^dag) eta_i.
inline Eigen::MatrixXcd sideband_hamiltonian(const std::vector<double>& eta, bool blue, std::size_t fock) {
    const std::size_t n_ions = eta.size();
    const std::size_t dim = (std::size_t{1} << n_ions) * fock;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t s = 0; s < (std::size_t{1} << n_ions); ++s) {
        for (std::size_t i = 0; i < n_ions; ++i) {
            const std::size_t bit = std::size_t{1} << i;
            if (s & bit) continue;
            const std::size_t up = s | bit;
            for (std::size_t m = 0; m < fock; ++m) {
                // raise spin i together with a (red) or a^dag (blue)
                if (!blue && m >= 1) {
                    const double v = eta[i] * std::sqrt(static_cast<double>(m));
                    h(dense_index(up, m - 1, fock), dense_index(s, m, fock)) += v;
                    h(dense_index(s, m, fock), dense_index(up, m - 1, fock)) += v;
                }
                if (blue && m + 1 < fock) {
                    const double v = eta[i] * std::sqrt(static_cast<double>(m + 1));
                    h(dense_index(up, m + 1, fock), dense_index(s, m, fock)) += v;
                    h(dense_index(s, m, fock), dense_index(up, m + 1, fock)) += v;
                }
            }
        }
    }
    return h;
}

/// <0,n| exp(-i H gt) |0,n> in the truncated full space.
inline cd survival_amplitude(const std::vector<double>& eta, bool blue, std::size_t n, double gt) {
    const std::size_t fock = n + eta.size() + 3;
    const Eigen::MatrixXcd h = sideband_hamiltonian(eta, blue, fock);
    const Eigen::MatrixXcd u = (cd(0.0, -gt) * h).exp();
    const auto k = static_cast<Eigen::Index>(dense_index(0, n, fock));
    return u(k, k);
}

/// <J0> after exp(-i H gt) acting on |0,n>.
inline double excitation_number(const std::vector<double>& eta, bool blue, std::size_t n, double gt) {
    const std::size_t fock = n + eta.size() + 3;
    const Eigen::MatrixXcd h = sideband_hamiltonian(eta, blue, fock);
    const Eigen::VectorXcd psi = (cd(0.0, -gt) * h).exp().col(static_cast<Eigen::Index>(dense_index(0, n, fock)));
    double acc = 0.0;
    for (std::size_t s = 0; s < (std::size_t{1} << eta.size()); ++s)
        for (std::size_t m = 0; m < fock; ++m)
            acc += std::norm(psi(static_cast<Eigen::Index>(dense_index(s, m, fock)))) * __builtin_popcountll(s);
    return acc;
}

/// Global probability that any ion is excited for a thermal state.
inline double global_probability(const std::vector<double>& eta, bool blue, double nbar, double gt, std::size_t n_max) {
    double p = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double pn = std::pow(nbar / (nbar + 1.0), static_cast<double>(n)) / (nbar + 1.0);
        p += pn * (1.0 - std::norm(survival_amplitude(eta, blue, n, gt)));
    }
    return p;
}

/// Excitation probability of a single ion under H = g eta sigma_x (a + a^dag),
/// thermal phonons, Fock space truncated at `fock` levels.
inline double bichromatic_probability(double eta, double nbar, double gt, std::size_t fock) {
    const auto f = static_cast<Eigen::Index>(fock);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * f, 2 * f);
    for (Eigen::Index m = 0; m + 1 < f; ++m) {
        const double v = eta * std::sqrt(static_cast<double>(m + 1));
        for (Eigen::Index s = 0; s < 2; ++s) {
            const Eigen::Index flip = 1 - s;
            h(flip * f + m + 1, s * f + m) += v;
            h(s * f + m, flip * f + m + 1) += v;
            h(flip * f + m, s * f + m + 1) += v;
            h(s * f + m + 1, flip * f + m) += v;
        }
    }
    // each (flip, s) pair above is visited twice; halve
    h *= 0.5;
    const Eigen::MatrixXcd u = (cd(0.0, -gt) * h).exp();
    double p = 0.0;
    for (Eigen::Index n = 0; n < f; ++n) {
        const double pn = std::pow(nbar / (nbar + 1.0), static_cast<double>(n)) / (nbar + 1.0);
        double up = 0.0;
        for (Eigen::Index m = 0; m < f; ++m) up += std::norm(u(f + m, n));
        p += pn * up;
    }
    return p;
}

}  // namespace oracle
