// ratio.hpp: the crystal sideband-ratio polynomial R_t(nbar), its inversion,
// and the finite-sample bias/variance of the resulting estimator.
//
// R_t(nbar) = nbar + (gt)^2 P2(nbar) - (gt)^4 P3(nbar) + (gt)^6 P4(nbar)
//
// All Pk carry the factor nbar (1 + nbar); with q = nbar (1 + nbar) they are
// written in terms of q and (1 + 2 nbar)^2 = 1 + 4q.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "icct/coefficients.hpp"
#include "icct/error.hpp"
#include "icct/polynomial.hpp"
#include "icct/thermal.hpp"

namespace icct {

template <class Real = double>
class RatioPolynomial {
public:
    RatioPolynomial() : RatioPolynomial(coefficient_set(std::vector<Real>{Real(1)})) {}

    explicit RatioPolynomial(const CoefficientSet<Real>& cs) : coeffs_(cs) {
        using P = Polynomial<Real>;
        const Real& A = cs.a;
        const Real& B1 = cs.b1;
        const Real& B2 = cs.b2;
        const Real& C1 = cs.c[0];
        const Real& C2 = cs.c[1];
        const Real& C3 = cs.c[2];
        const Real& C4 = cs.c[3];
        const Real& C5 = cs.c[4];
        const auto& D = cs.d;  // D[0] is D1
        const Real c_combo = cs.c_combo();

        const P q{Real(0), Real(1), Real(1)};
        const P one{Real(1)};
        const P lin2{Real(1), Real(2)};     // 1 + 2 nbar
        const P sq = one + q * Real(4);    // (1 + 2 nbar)^2

        p2_ = q * (B2 / (Real(6) * A));

        const Real k3 = Real(2) * c_combo * A - Real(5) * B2 * (Real(2) * B2 + B1) + Real(15) * B2 * A * A;
        p3_ = q * lin2 * (k3 / (Real(360) * A * A));

        const Real d_const = Real(12) * D[0] + Real(2) * D[9] + Real(3) * D[10] + Real(2) * D[11] + D[12] + D[13] +
                             Real(9) * D[2] + Real(6) * D[3] + Real(3) * D[4] + Real(2) * D[5] + D[6] +
                             Real(6) * D[7] + Real(4) * D[8];
        const Real d_q = Real(6) * D[0] + Real(2) * D[9] + Real(3) * D[10] + Real(2) * D[11] + D[12] + D[13] +
                         Real(5) * D[2] + Real(4) * D[3] + Real(3) * D[4] + Real(2) * D[5] + D[6] +
                         Real(4) * D[7] + Real(3) * D[8];
        const Real A2 = A * A;
        const Real A3 = A2 * A;
        const Real A4 = A3 * A;
        const Real b_sum = B1 + Real(2) * B2;

        P bracket = sq * (Real(-315) * A4 * B2 + Real(35) * B2 * b_sum * b_sum);
        bracket = bracket + (one + q * Real(8)) * (Real(42) * A3 * c_combo);
        bracket = bracket + (P{d_const} + q * (Real(6) * d_q) - sq * (Real(70) * B2 * B2)) * (Real(3) * A2);
        const P inner = P{C2 + Real(4) * (C3 + Real(2) * C4 + Real(3) * C5)} +
                        q * (Real(6) * (C2 + Real(3) * C3 + Real(5) * C4 + Real(7) * C5)) +
                        (P{Real(2)} + q * Real(9)) * (Real(2) * C1);
        bracket = bracket - (sq * (B1 * c_combo) + inner * B2) * (Real(14) * A);
        p4_ = q * bracket * (Real(1) / (Real(30240) * A3));
    }

    const CoefficientSet<Real>& coefficients() const { return coeffs_; }
    const Polynomial<Real>& p2() const { return p2_; }
    const Polynomial<Real>& p3() const { return p3_; }
    const Polynomial<Real>& p4() const { return p4_; }

    /// R_t as a polynomial in nbar for fixed gt (degree <= 4).
    Polynomial<Real> at(const Real& gt) const {
        const Real t2 = gt * gt;
        const Real t4 = t2 * t2;
        const Real t6 = t4 * t2;
        return Polynomial<Real>{Real(0), Real(1)} + p2_ * t2 - p3_ * t4 + p4_ * t6;
    }

    /// R_t(nbar) - nbar, evaluated without forming the leading nbar so that
    /// small-time excess values keep full relative precision.
    Real excess(const Real& nbar, const Real& gt) const {
        const Real t2 = gt * gt;
        return t2 * (p2_(nbar) - t2 * (p3_(nbar) - t2 * p4_(nbar)));
    }

    Real value(const Real& nbar, const Real& gt) const { return nbar + excess(nbar, gt); }
    Real derivative(const Real& nbar, const Real& gt) const { return at(gt).derivative()(nbar); }
    Real second_derivative(const Real& nbar, const Real& gt) const { return at(gt).derivative().derivative()(nbar); }

private:
    CoefficientSet<Real> coeffs_;
    Polynomial<Real> p2_, p3_, p4_;
};

inline RatioPolynomial<double> ratio_polynomial(const ModeSpec& mode) {
    return RatioPolynomial<double>(coefficient_set(mode));
}

inline double ratio_value(const RatioPolynomial<double>& poly, double nbar, double gt) { return poly.value(nbar, gt); }

struct InversionOptions {
    double imag_tolerance{1e-9};   // relative to 1 + |Re|
    double ambiguity_window{0.25}; // fraction of the rough estimate
};

/// Admissible root of R_t(nbar) = r. Among real, non-negative roots the one
/// closest to the rough estimate r (all time-dependent terms dropped) wins.
inline double invert_ratio(const RatioPolynomial<double>& poly, double r_measured, double gt, const InversionOptions& opts = {}) {
    if (!(r_measured >= 0.0) || !std::isfinite(r_measured))
        throw Error(ErrorCode::InvalidInput, "measured ratio must be finite and >= 0");
    if (!(gt >= 0.0)) throw Error(ErrorCode::InvalidInput, "gt must be >= 0");
    if (r_measured == 0.0) return 0.0;  // every Pk vanishes at nbar = 0

    const Polynomial<double> rt = poly.at(gt);
    const Polynomial<double> shifted = rt - Polynomial<double>{r_measured};
    std::vector<double> admissible;
    for (const auto& z : polynomial_roots(shifted)) {
        if (std::abs(z.imag()) > opts.imag_tolerance * (1.0 + std::abs(z.real()))) continue;
        double x = z.real();
        // Newton polish against the un-deflated polynomial
        const Polynomial<double> d = shifted.derivative();
        for (int it = 0; it < 3; ++it) {
            const double slope = d(x);
            if (slope == 0.0) break;
            const double step = shifted(x) / slope;
            if (!std::isfinite(step)) break;
            x -= step;
        }
        if (x < -1e-12) continue;
        admissible.push_back(std::max(x, 0.0));
    }
    if (admissible.empty())
        throw Error(ErrorCode::NoAdmissibleRoot, "no real non-negative root for r=" + std::to_string(r_measured) + " at gt=" + std::to_string(gt));

    std::size_t best = 0;
    for (std::size_t i = 1; i < admissible.size(); ++i)
        if (std::abs(admissible[i] - r_measured) < std::abs(admissible[best] - r_measured)) best = i;
    const double window = opts.ambiguity_window * r_measured;
    for (std::size_t i = 0; i < admissible.size(); ++i) {
        if (i == best) continue;
        if (std::abs(admissible[i] - admissible[best]) > 1e-9 * (1.0 + admissible[best]) &&
            std::abs(admissible[i] - r_measured) <= window && std::abs(admissible[best] - r_measured) <= window)
            throw Error(ErrorCode::AmbiguousRoot, "two admissible roots near r=" + std::to_string(r_measured));
    }
    return admissible[best];
}

namespace detail {
inline void check_sideband_pair(double p_r, double p_b) {
    if (!(p_r >= 0.0 && p_b <= 1.0 && p_r <= 1.0 && p_b >= 0.0))
        throw Error(ErrorCode::InvalidInput, "probabilities must lie in [0, 1]");
    if (!(p_b - p_r >= 1e-12)) throw Error(ErrorCode::DegenerateSidebands, "P_b - P_r below 1e-12");
}
// 2 Pb Pr (2 - Pb - Pr) / (Pb - Pr)^3
inline double bias_kernel(double p_r, double p_b) {
    const double d = p_b - p_r;
    return 2.0 * p_b * p_r * (2.0 - p_b - p_r) / (d * d * d);
}
// Pb Pr (Pb + Pr - 2 Pb Pr) / (Pb - Pr)^4
inline double spread_kernel(double p_r, double p_b) {
    const double d = p_b - p_r;
    return p_b * p_r * (p_b + p_r - 2.0 * p_b * p_r) / (d * d * d * d);
}
}  // namespace detail

/// Asymptotic bias of the single-ion estimator f_r / (f_b - f_r);
/// `shots` is the total count, split evenly between the sidebands.
inline double single_ion_bias(double p_r, double p_b, double shots) {
    detail::check_sideband_pair(p_r, p_b);
    return (1.0 / shots) * detail::bias_kernel(p_r, p_b);
}

inline double single_ion_variance(double p_r, double p_b, double shots) {
    detail::check_sideband_pair(p_r, p_b);
    return (1.0 / shots) * (2.0 * detail::spread_kernel(p_r, p_b));
}

/// Asymptotic bias of the inverted crystal ratio. ratio_prime/second are
/// dR_t/dnbar and d2R_t/dnbar2 at the estimate.
inline double crystal_bias(double p_r, double p_b, double ratio_prime, double ratio_second, double shots) {
    detail::check_sideband_pair(p_r, p_b);
    const double rp3 = ratio_prime * ratio_prime * ratio_prime;
    return (1.0 / shots) * (detail::bias_kernel(p_r, p_b) / ratio_prime - detail::spread_kernel(p_r, p_b) * ratio_second / rp3);
}

inline double crystal_variance(double p_r, double p_b, double ratio_prime, double shots) {
    detail::check_sideband_pair(p_r, p_b);
    return (1.0 / shots) * (2.0 * detail::spread_kernel(p_r, p_b) / (ratio_prime * ratio_prime));
}

struct SidebandPair {
    double red{0.0};
    double blue{0.0};
};

/// Single-ion sideband flops for a thermal state under H = g(s+ a + h.c.):
/// each Fock term contributes sin^2(gt sqrt(n+1)). Both sums carry n_max + 1
/// terms (blue from n = 0..n_max, red from n = 1..n_max+1), so the thermal
/// ratio identity holds term by term despite truncation.
inline SidebandPair single_ion_flops(double nbar, double gt, std::size_t n_max) {
    SidebandPair p;
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double s = std::sin(gt * std::sqrt(static_cast<double>(n + 1)));
        p.blue += thermal::occupation(nbar, n) * s * s;
        p.red += thermal::occupation(nbar, n + 1) * s * s;
    }
    return p;
}

inline SidebandPair single_ion_flops(double nbar, double gt) {
    return single_ion_flops(nbar, gt, thermal::tail_cutoff(nbar));
}

/// Analytic d/dnbar of single_ion_flops.
inline SidebandPair single_ion_flops_derivative(double nbar, double gt, std::size_t n_max) {
    SidebandPair p;
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double s = std::sin(gt * std::sqrt(static_cast<double>(n + 1)));
        p.blue += thermal::occupation_derivative(nbar, n) * s * s;
        p.red += thermal::occupation_derivative(nbar, n + 1) * s * s;
    }
    return p;
}

inline SidebandPair single_ion_flops_derivative(double nbar, double gt) {
    return single_ion_flops_derivative(nbar, gt, thermal::tail_cutoff(nbar));
}

}  // namespace icct
