// dynamics.hpp: exact sideband dynamics of a crystal mode.
//
// Red and blue sideband Hamiltonians conserve a^dag a + J0 and a^dag a - J0
// respectively, so the evolution of |0,n> stays in a block labelled by n.
// Each block is reduced to the spectral measure of its start vector
// (energies and weights), from which the survival amplitude follows at any
// time without further propagation. Uniform (center-of-mass) modes use the
// symmetric Dicke basis, where the block is already tridiagonal.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include "icct/crystal.hpp"
#include "icct/error.hpp"
#include "icct/parallel.hpp"
#include "icct/thermal.hpp"

namespace icct {

enum class SidebandKind { Red, Blue };

inline const char* to_string(SidebandKind kind) { return kind == SidebandKind::Red ? "red" : "blue"; }

/// Conserved-excitation block containing |0,n>. Basis index 0 is |0,n>;
/// `excitations` holds the spin-excitation number of every basis state.
struct SidebandBlock {
    Eigen::SparseMatrix<double> hamiltonian;  // units of g
    std::vector<int> excitations;
};

inline constexpr std::size_t kMaxFullSpaceIons = 12;

/// Block of H_r = J+ a + J- a^dag (red) or H_b = J+ a^dag + J- a (blue) in the
/// product basis |spin mask, phonons>.
inline SidebandBlock sideband_block(const std::vector<double>& eta, SidebandKind kind, std::size_t n) {
    const std::size_t N = eta.size();
    if (N == 0) throw Error(ErrorCode::InvalidInput, "empty mode vector");
    if (N > kMaxFullSpaceIons)
        throw Error(ErrorCode::DimensionCap, "full-space propagation limited to N <= " + std::to_string(kMaxFullSpaceIons));
    const std::size_t full = std::size_t{1} << N;
    const bool red = kind == SidebandKind::Red;

    std::vector<std::int64_t> index(full, -1);
    SidebandBlock block;
    for (std::size_t s = 0; s < full; ++s) {
        const auto m = static_cast<std::size_t>(__builtin_popcountll(s));
        if (red && m > n) continue;
        index[s] = static_cast<std::int64_t>(block.excitations.size());
        block.excitations.push_back(static_cast<int>(m));
    }
    const auto dim = static_cast<Eigen::Index>(block.excitations.size());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(dim) * N);
    for (std::size_t s = 0; s < full; ++s) {
        if (index[s] < 0) continue;
        const auto m = static_cast<double>(__builtin_popcountll(s));
        // phonons in state s, and the bosonic factor for raising one spin
        const double phonons = red ? static_cast<double>(n) - m : static_cast<double>(n) + m;
        const double boson = red ? std::sqrt(phonons) : std::sqrt(phonons + 1.0);
        if (boson == 0.0) continue;
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t bit = std::size_t{1} << i;
            if (s & bit) continue;
            const std::int64_t target = index[s | bit];
            if (target < 0) continue;
            const double v = eta[i] * boson;
            triplets.emplace_back(static_cast<Eigen::Index>(target), static_cast<Eigen::Index>(index[s]), v);
            triplets.emplace_back(static_cast<Eigen::Index>(index[s]), static_cast<Eigen::Index>(target), v);
        }
    }
    block.hamiltonian.resize(dim, dim);
    block.hamiltonian.setFromTriplets(triplets.begin(), triplets.end());
    return block;
}

/// Symmetric-subspace block for a uniform mode: basis |M, n -/+ M>,
/// couplings sqrt((M+1)(N-M)/N) times the bosonic factor.
inline SidebandBlock dicke_block(std::size_t n_ions, SidebandKind kind, std::size_t n) {
    if (n_ions == 0) throw Error(ErrorCode::InvalidInput, "need at least one ion");
    const bool red = kind == SidebandKind::Red;
    const std::size_t top = red ? std::min(n_ions, n) : n_ions;
    const auto dim = static_cast<Eigen::Index>(top + 1);
    const double N = static_cast<double>(n_ions);
    SidebandBlock block;
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t M = 0; M <= top; ++M) block.excitations.push_back(static_cast<int>(M));
    for (std::size_t M = 0; M < top; ++M) {
        const double m = static_cast<double>(M);
        const double spin = std::sqrt((m + 1.0) * (N - m) / N);
        const double boson = red ? std::sqrt(static_cast<double>(n) - m) : std::sqrt(static_cast<double>(n) + m + 1.0);
        const double v = spin * boson;
        triplets.emplace_back(static_cast<Eigen::Index>(M + 1), static_cast<Eigen::Index>(M), v);
        triplets.emplace_back(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M + 1), v);
    }
    block.hamiltonian.resize(dim, dim);
    block.hamiltonian.setFromTriplets(triplets.begin(), triplets.end());
    return block;
}

/// Spectral measure of |0,n> in its block, valid for |gt| <= valid_gt.
struct SurvivalSpectrum {
    std::vector<double> energies;
    std::vector<double> components;  // <k|0,n>, real
    Eigen::MatrixXd excitation_kernel;  // c_j c_k <j|J0|k>; empty unless requested
    double valid_gt{std::numeric_limits<double>::infinity()};
    std::size_t krylov_dimension{0};

    std::complex<double> amplitude(double gt) const {
        std::complex<double> a{0.0, 0.0};
        for (std::size_t k = 0; k < energies.size(); ++k)
            a += components[k] * components[k] * std::polar(1.0, -energies[k] * gt);
        return a;
    }

    /// 1 - |<0,n|U|0,n>|^2 written as 2c - c^2 - s^2 with
    /// c = sum w (1 - cos E t) and s = sum w sin E t. Both are O(t^2) or
    /// smaller, so no cancellation against 1 occurs at short times.
    double complement(double gt) const {
        double c = 0.0, s = 0.0;
        for (std::size_t k = 0; k < energies.size(); ++k) {
            const double w = components[k] * components[k];
            const double half = std::sin(0.5 * energies[k] * gt);
            c += w * 2.0 * half * half;
            s += w * std::sin(energies[k] * gt);
        }
        return std::clamp(2.0 * c - c * c - s * s, 0.0, 1.0);
    }

    /// <J0>(gt); requires the excitation kernel.
    double mean_excitations(double gt) const {
        if (excitation_kernel.size() == 0) throw Error(ErrorCode::InvalidInput, "spectrum built without excitation kernel");
        double acc = 0.0;
        const auto K = excitation_kernel.rows();
        for (Eigen::Index j = 0; j < K; ++j) {
            acc += excitation_kernel(j, j);
            for (Eigen::Index k = j + 1; k < K; ++k)
                acc += 2.0 * excitation_kernel(j, k) * std::cos((energies[static_cast<std::size_t>(j)] - energies[static_cast<std::size_t>(k)]) * gt);
        }
        return std::max(acc, 0.0);  // rounding at gt = 0
    }
};

struct PropagationOptions {
    double tolerance{1e-14};       // amplitude convergence on the check grid
    std::size_t max_krylov{600};
    bool with_excitations{false};
};

namespace detail {
inline SurvivalSpectrum spectrum_from_tridiagonal(const std::vector<double>& alpha, const std::vector<double>& beta,
                                                  Eigen::MatrixXd* basis_excitation) {
    const auto K = static_cast<Eigen::Index>(alpha.size());
    SurvivalSpectrum spec;
    spec.krylov_dimension = alpha.size();
    if (K == 1) {
        spec.energies = {alpha[0]};
        spec.components = {1.0};
        if (basis_excitation) spec.excitation_kernel = *basis_excitation;
        return spec;
    }
    Eigen::VectorXd diag(K), sub(K - 1);
    for (Eigen::Index i = 0; i < K; ++i) diag(i) = alpha[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i + 1 < K; ++i) sub(i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "tridiagonal eigensolver failed");
    const Eigen::MatrixXd& V = solver.eigenvectors();
    spec.energies.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + K);
    spec.components.resize(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k) spec.components[static_cast<std::size_t>(k)] = V(0, k);
    if (basis_excitation) {
        const Eigen::MatrixXd m = V.transpose() * (*basis_excitation) * V;
        spec.excitation_kernel.resize(K, K);
        for (Eigen::Index j = 0; j < K; ++j)
            for (Eigen::Index k = 0; k < K; ++k) spec.excitation_kernel(j, k) = V(0, j) * V(0, k) * m(j, k);
    }
    return spec;
}

inline double tridiagonal_amplitude_gap(const SurvivalSpectrum& a, const SurvivalSpectrum& b, double gt_max) {
    double gap = 0.0;
    for (int i = 1; i <= 16; ++i) {
        const double t = gt_max * i / 16.0;
        gap = std::max(gap, std::abs(a.amplitude(t) - b.amplitude(t)));
    }
    return gap;
}
}  // namespace detail

/// Lanczos reduction of a block to the spectral measure of basis state 0,
/// with full reorthogonalization. Stops at an invariant subspace (exact) or
/// once the survival amplitude on [0, gt_max] has converged.
inline SurvivalSpectrum block_spectrum(const SidebandBlock& block, double gt_max, const PropagationOptions& opts = {}) {
    const Eigen::Index dim = block.hamiltonian.rows();
    const auto cap = static_cast<Eigen::Index>(std::min<std::size_t>(opts.max_krylov, static_cast<std::size_t>(dim)));
    double scale = 0.0;
    for (Eigen::Index k = 0; k < block.hamiltonian.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(block.hamiltonian, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    const double breakdown = 1e-13 * std::max(1.0, scale);

    Eigen::MatrixXd Q(dim, std::max<Eigen::Index>(cap, 1));
    Q.col(0).setZero();
    Q(0, 0) = 1.0;
    std::vector<double> alpha, beta;
    SurvivalSpectrum previous;
    bool have_previous = false;

    auto finish = [&](Eigen::Index K) {
        Eigen::MatrixXd excitation;
        Eigen::MatrixXd* excitation_ptr = nullptr;
        if (opts.with_excitations) {
            Eigen::VectorXd j0(dim);
            for (Eigen::Index i = 0; i < dim; ++i) j0(i) = block.excitations[static_cast<std::size_t>(i)];
            const Eigen::MatrixXd Qk = Q.leftCols(K);
            excitation = Qk.transpose() * j0.asDiagonal() * Qk;
            excitation_ptr = &excitation;
        }
        return detail::spectrum_from_tridiagonal(alpha, beta, excitation_ptr);
    };

    for (Eigen::Index j = 0; j < cap; ++j) {
        Eigen::VectorXd w = block.hamiltonian * Q.col(j);
        alpha.push_back(Q.col(j).dot(w));
        w -= alpha.back() * Q.col(j);
        if (j > 0) w -= beta.back() * Q.col(j - 1);
        for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        const double b = w.norm();
        const Eigen::Index K = j + 1;
        if (b < breakdown || K == dim) {
            SurvivalSpectrum spec = finish(K);
            spec.valid_gt = std::numeric_limits<double>::infinity();
            return spec;
        }
        if (K % 4 == 0 && K >= 8) {
            SurvivalSpectrum current = detail::spectrum_from_tridiagonal(alpha, beta, nullptr);
            if (have_previous && detail::tridiagonal_amplitude_gap(current, previous, gt_max) < opts.tolerance) {
                SurvivalSpectrum spec = finish(K);
                spec.valid_gt = gt_max;
                return spec;
            }
            previous = std::move(current);
            have_previous = true;
        }
        if (K == cap) break;
        beta.push_back(b);
        Q.col(K) = w / b;
    }
    throw Error(ErrorCode::PropagationTolerance, "Krylov propagation did not converge within " + std::to_string(cap) + " vectors");
}

/// Dense exp(-iHt) reference for small blocks.
inline std::complex<double> survival_amplitude_dense(const SidebandBlock& block, double gt, std::size_t max_dim = 512) {
    const Eigen::Index dim = block.hamiltonian.rows();
    if (static_cast<std::size_t>(dim) > max_dim) throw Error(ErrorCode::DimensionCap, "dense exponential limited to 512 states");
    const Eigen::MatrixXcd h = Eigen::MatrixXd(block.hamiltonian).cast<std::complex<double>>();
    const Eigen::MatrixXcd u = (std::complex<double>(0.0, -gt) * h).exp();
    return u(0, 0);
}

/// Survival spectra of |0,n> for n = 0..n_max under one sideband.
class SidebandOracle {
public:
    enum class Method { Auto, Full, Dicke };

    SidebandOracle(const ModeSpec& mode, SidebandKind kind, double gt_max, std::size_t n_max,
                   Method method = Method::Auto, const PropagationOptions& opts = {})
        : kind_(kind), n_ions_(mode.n_ions()), gt_max_(gt_max) {
        if (mode.eta.empty()) throw Error(ErrorCode::InvalidInput, "empty mode vector");
        if (method == Method::Auto) method = is_uniform_mode(mode) ? Method::Dicke : Method::Full;
        if (method == Method::Dicke && !is_uniform_mode(mode, 1e-9))
            throw Error(ErrorCode::InvalidInput, "Dicke propagation requires a uniform mode");
        if (method == Method::Full && n_ions_ > kMaxFullSpaceIons)
            throw Error(ErrorCode::DimensionCap, "full-space propagation limited to N <= " + std::to_string(kMaxFullSpaceIons));
        dicke_ = method == Method::Dicke;
        spectra_.resize(n_max + 1);
        parallel_for(n_max + 1, [&](std::size_t n) {
            const SidebandBlock block = dicke_ ? dicke_block(n_ions_, kind, n) : sideband_block(mode.eta, kind, n);
            spectra_[n] = block_spectrum(block, gt_max, opts);
        });
    }

    /// Oracle covering thermal states up to nbar_max under the tail rule.
    static SidebandOracle for_nbar(const ModeSpec& mode, SidebandKind kind, double gt_max, double nbar_max,
                                   Method method = Method::Auto, const PropagationOptions& opts = {}) {
        return SidebandOracle(mode, kind, gt_max, thermal::tail_cutoff(nbar_max), method, opts);
    }

    SidebandKind kind() const { return kind_; }
    bool uses_dicke() const { return dicke_; }
    std::size_t n_max() const { return spectra_.size() - 1; }
    double gt_max() const { return gt_max_; }
    const SurvivalSpectrum& spectrum(std::size_t n) const { return spectra_.at(n); }

    /// Global excitation probability sum_n p_n (1 - |A_n|^2) over the
    /// tail-rule levels (clipped to the levels held).
    double probability(double nbar, double gt) const {
        const std::size_t top = std::min(thermal::tail_cutoff(nbar), n_max());
        check_range(gt);
        double p = 0.0;
        for (std::size_t n = 0; n <= top; ++n) p += thermal::occupation(nbar, n) * spectra_[n].complement(gt);
        return p;
    }

    /// Same levels as probability(), with analytic d p_n / d nbar. Used for
    /// cross-checks; the CRB curves use central differences.
    double probability_derivative(double nbar, double gt) const {
        const std::size_t top = std::min(thermal::tail_cutoff(nbar), n_max());
        check_range(gt);
        double p = 0.0;
        for (std::size_t n = 0; n <= top; ++n) p += thermal::occupation_derivative(nbar, n) * spectra_[n].complement(gt);
        return p;
    }

    /// Fixed-level variant for finite differences in nbar.
    double probability_levels(double nbar, double gt, std::size_t top) const {
        check_range(gt);
        top = std::min(top, n_max());
        double p = 0.0;
        for (std::size_t n = 0; n <= top; ++n) p += thermal::occupation(nbar, n) * spectra_[n].complement(gt);
        return p;
    }

    /// Mean excitation per ion (1/N) sum_n p_n <J0>_n.
    double mean_excitation(double nbar, double gt) const {
        const std::size_t top = std::min(thermal::tail_cutoff(nbar), n_max());
        check_range(gt);
        double p = 0.0;
        for (std::size_t n = 0; n <= top; ++n) p += thermal::occupation(nbar, n) * spectra_[n].mean_excitations(gt);
        return p / static_cast<double>(n_ions_);
    }

private:
    void check_range(double gt) const {
        if (!(std::abs(gt) <= gt_max_ * (1.0 + 1e-12)))
            throw Error(ErrorCode::InvalidInput, "gt=" + std::to_string(gt) + " outside the propagated range");
    }

    SidebandKind kind_;
    std::size_t n_ions_;
    double gt_max_;
    bool dicke_{false};
    std::vector<SurvivalSpectrum> spectra_;
};

struct PropagationResult {
    std::vector<double> gt_grid;
    std::vector<double> p_global;
    std::vector<double> p_mean;
    std::vector<std::vector<std::complex<double>>> survival_amplitudes;  // [n][gt index]
};

namespace detail {
inline PropagationResult propagate(const ModeSpec& mode, SidebandKind kind, double nbar, const std::vector<double>& gt_grid,
                                   SidebandOracle::Method method) {
    if (!(nbar >= 0.0)) throw Error(ErrorCode::InvalidInput, "nbar must be >= 0");
    double gt_max = 0.0;
    for (double gt : gt_grid) {
        if (!(gt >= 0.0) || !std::isfinite(gt)) throw Error(ErrorCode::InvalidInput, "gt grid must be finite and >= 0");
        gt_max = std::max(gt_max, gt);
    }
    PropagationOptions opts;
    opts.with_excitations = true;
    const SidebandOracle oracle = SidebandOracle::for_nbar(mode, kind, std::max(gt_max, 1e-12), nbar, method, opts);
    PropagationResult result;
    result.gt_grid = gt_grid;
    result.p_global.reserve(gt_grid.size());
    result.p_mean.reserve(gt_grid.size());
    for (double gt : gt_grid) {
        result.p_global.push_back(oracle.probability(nbar, gt));
        result.p_mean.push_back(oracle.mean_excitation(nbar, gt));
    }
    result.survival_amplitudes.resize(oracle.n_max() + 1);
    for (std::size_t n = 0; n <= oracle.n_max(); ++n)
        for (double gt : gt_grid) result.survival_amplitudes[n].push_back(oracle.spectrum(n).amplitude(gt));
    return result;
}
}  // namespace detail

/// Exact flop in the full excitation-conserving blocks (N <= 12).
inline PropagationResult exact_flop(const ModeSpec& mode, SidebandKind kind, double nbar, const std::vector<double>& gt_grid) {
    return detail::propagate(mode, kind, nbar, gt_grid, SidebandOracle::Method::Full);
}

/// Exact flop of the center-of-mass mode in the symmetric Dicke subspace.
inline PropagationResult com_dicke_flop(std::size_t n_ions, SidebandKind kind, double nbar, const std::vector<double>& gt_grid) {
    return detail::propagate(com_mode(n_ions), kind, nbar, gt_grid, SidebandOracle::Method::Dicke);
}

/// Excitation probability of ion i under simultaneous red and blue drive:
/// (1 - exp(-2 (gt eta_i)^2 (2 nbar + 1))) / 2.
inline double bichromatic_excitation(double eta_i, double nbar, double gt) {
    const double x = gt * eta_i;
    return 0.5 * (1.0 - std::exp(-2.0 * x * x * (2.0 * nbar + 1.0)));
}

/// d/dnbar of bichromatic_excitation.
inline double bichromatic_excitation_derivative(double eta_i, double nbar, double gt) {
    const double x = gt * eta_i;
    return 2.0 * x * x * std::exp(-2.0 * x * x * (2.0 * nbar + 1.0));
}

}  // namespace icct
