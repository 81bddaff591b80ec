// crystal.hpp: normal modes of ion crystals and the mode description used by
// every estimator.
//
// Units are dimensionless: positions in the characteristic Coulomb length,
// frequencies in units of the axial trap frequency.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icct/error.hpp"

namespace icct {

/// One motional mode as seen by the sideband drive. `eta` is normalized to
/// unit Euclidean norm; `g` is the average sideband Rabi rate in rad/s.
struct ModeSpec {
    std::string label;
    std::vector<double> eta;
    double g{1.0};
    std::optional<double> frequency;  // rad/s, informational

    std::size_t n_ions() const { return eta.size(); }
};

/// True when all |eta_i| coincide, i.e. the mode couples like the
/// center-of-mass mode (sign flips are local spin rotations).
inline bool is_uniform_mode(const ModeSpec& mode, double tol = 1e-12) {
    if (mode.eta.empty()) return false;
    const double ref = std::abs(mode.eta.front());
    return std::all_of(mode.eta.begin(), mode.eta.end(),
                       [&](double e) { return std::abs(std::abs(e) - ref) <= tol; });
}

inline ModeSpec make_mode_spec(const std::vector<double>& eta_unit, double g, std::string label) {
    if (eta_unit.empty()) throw Error(ErrorCode::InvalidInput, "mode vector is empty");
    double norm2 = 0.0;
    for (double e : eta_unit) {
        if (!std::isfinite(e)) throw Error(ErrorCode::InvalidInput, "mode vector has non-finite entries");
        norm2 += e * e;
    }
    if (norm2 == 0.0) throw Error(ErrorCode::InvalidInput, "mode vector is zero");
    if (!(g > 0.0) || !std::isfinite(g)) throw Error(ErrorCode::InvalidInput, "Rabi rate g must be positive");
    const double norm = std::sqrt(norm2);
    ModeSpec mode;
    mode.label = std::move(label);
    mode.g = g;
    mode.eta.reserve(eta_unit.size());
    for (double e : eta_unit) mode.eta.push_back(e / norm);
    return mode;
}

inline ModeSpec com_mode(std::size_t n_ions, double g = 1.0) {
    return make_mode_spec(std::vector<double>(n_ions, 1.0), g, "com" + std::to_string(n_ions));
}

enum class ChainAxis { Axial, Transverse };

struct ChainConfig {
    std::size_t n_ions{1};
    double anisotropy{10.0};  // transverse / axial trap frequency
    ChainAxis axis{ChainAxis::Transverse};
};

struct EquilibriumOptions {
    int max_iterations{200};
    double tolerance{1e-12};
};

/// Force residual of a linear Coulomb chain in a unit harmonic well.
inline std::vector<double> chain_force_residual(const std::vector<double>& u) {
    const std::size_t n = u.size();
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = u[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = u[i] - u[j];
            acc += (j < i ? -1.0 : 1.0) / (d * d);
        }
        f[i] = acc;
    }
    return f;
}

/// Equilibrium positions of an N-ion chain, ascending and symmetric about 0.
/// Damped Newton iteration from a uniform-spacing ansatz.
inline std::vector<double> equilibrium_positions(std::size_t n_ions, const EquilibriumOptions& opts = {}) {
    if (n_ions == 0) throw Error(ErrorCode::InvalidInput, "need at least one ion");
    const std::size_t n = n_ions;
    if (n == 1) return {0.0};

    const double spacing = 2.018 / std::pow(static_cast<double>(n), 0.559);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) * spacing;

    auto max_abs = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };
    auto ordered = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] > v[i - 1])) return false;
        return true;
    };

    std::vector<double> f = chain_force_residual(u);
    double residual = max_abs(f);
    const auto dim = static_cast<Eigen::Index>(n);
    for (int iter = 0; iter < opts.max_iterations && residual >= opts.tolerance; ++iter) {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd rhs(dim);
        for (std::size_t i = 0; i < n; ++i) {
            double diag = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double c = 2.0 / std::pow(std::abs(u[i] - u[j]), 3);
                diag += c;
                jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -c;
            }
            jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag;
            rhs(static_cast<Eigen::Index>(i)) = -f[i];
        }
        const Eigen::VectorXd step = jac.ldlt().solve(rhs);

        double damping = 1.0;
        for (int halving = 0; halving < 40; ++halving, damping *= 0.5) {
            std::vector<double> trial(u);
            for (std::size_t i = 0; i < n; ++i) trial[i] += damping * step(static_cast<Eigen::Index>(i));
            if (!ordered(trial)) continue;
            std::vector<double> ft = chain_force_residual(trial);
            const double rt = max_abs(ft);
            if (rt < residual || halving == 39) {
                u = std::move(trial);
                f = std::move(ft);
                residual = rt;
                break;
            }
        }
    }
    if (!(residual < opts.tolerance))
        throw Error(ErrorCode::NonConvergence, "equilibrium solve did not converge for N=" + std::to_string(n));

    std::vector<double> sym(n);
    for (std::size_t i = 0; i < n; ++i) sym[i] = 0.5 * (u[i] - u[n - 1 - i]);
    return sym;
}

/// Dimensionless Hessian of the chain potential along `axis`; eigenvalues are
/// squared mode frequencies in units of the axial trap frequency.
inline Eigen::MatrixXd chain_hessian(const ChainConfig& config, const std::vector<double>& positions) {
    const std::size_t n = positions.size();
    const auto dim = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    const bool axial = config.axis == ChainAxis::Axial;
    const double a2 = config.anisotropy * config.anisotropy;
    for (std::size_t i = 0; i < n; ++i) {
        double diag = axial ? 1.0 : a2;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double c = 1.0 / std::pow(std::abs(positions[i] - positions[j]), 3);
            diag += axial ? 2.0 * c : -c;
            h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = axial ? -2.0 * c : c;
        }
        h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag;
    }
    return h;
}

struct ChainMode {
    double frequency{0.0};  // units of the axial trap frequency
    std::vector<double> eta_unit;
};

/// Normal modes sorted by ascending frequency. Eigenvector signs are fixed so
/// the component sum is non-negative (first non-zero entry positive on ties).
inline std::vector<ChainMode> chain_modes(const ChainConfig& config) {
    if (config.n_ions == 0) throw Error(ErrorCode::InvalidInput, "need at least one ion");
    if (!(config.anisotropy > 0.0)) throw Error(ErrorCode::InvalidInput, "anisotropy must be positive");
    const auto positions = equilibrium_positions(config.n_ions);
    const Eigen::MatrixXd h = chain_hessian(config, positions);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "Hessian diagonalization failed");

    std::vector<ChainMode> modes;
    for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
        const double lambda = solver.eigenvalues()(k);
        if (!(lambda > 0.0))
            throw Error(ErrorCode::Instability, "chain is unstable (non-positive Hessian eigenvalue); raise the anisotropy");
        Eigen::VectorXd v = solver.eigenvectors().col(k);
        double sum = v.sum();
        if (std::abs(sum) < 1e-12) {
            for (Eigen::Index i = 0; i < v.size(); ++i)
                if (std::abs(v(i)) > 1e-12) {
                    sum = v(i);
                    break;
                }
        }
        if (sum < 0.0) v = -v;
        modes.push_back({std::sqrt(lambda), std::vector<double>(v.data(), v.data() + v.size())});
    }
    return modes;
}

/// Anisotropy of a transverse chain whose mode frequencies best reproduce the
/// measured ones up to a common scale (least squares on frequency ratios to
/// the highest mode, golden-section search).
inline double anisotropy_from_frequencies(std::size_t n_ions, std::vector<double> measured, double lo = 1.0, double hi = 100.0) {
    if (measured.size() != n_ions || n_ions < 2)
        throw Error(ErrorCode::InvalidInput, "need one measured frequency per ion (N >= 2)");
    std::sort(measured.begin(), measured.end());
    const auto positions = equilibrium_positions(n_ions);
    ChainConfig probe{n_ions, 1.0, ChainAxis::Transverse};
    const Eigen::MatrixXd coulomb = chain_hessian(probe, positions) - Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_ions), static_cast<Eigen::Index>(n_ions));
    const Eigen::VectorXd mu = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(coulomb, Eigen::EigenvaluesOnly).eigenvalues();

    auto cost = [&](double a) {
        const double a2 = a * a;
        const double top = std::sqrt(a2 + mu(mu.size() - 1));
        double s = 0.0;
        for (std::size_t k = 0; k < n_ions; ++k) {
            const double lam = a2 + mu(static_cast<Eigen::Index>(k));
            const double pred = lam > 0.0 ? std::sqrt(lam) / top : 0.0;
            const double d = pred - measured[k] / measured.back();
            s += d * d;
        }
        return s;
    };
    // the Coulomb shift vanishes for the COM mode, so mu.max() == 0
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = cost(x1), f2 = cost(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-12 * (1.0 + std::abs(a)); ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - phi * (b - a); f1 = cost(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + phi * (b - a); f2 = cost(x2);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace icct
