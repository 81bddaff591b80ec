// coefficients.hpp: mode-dependent spin-string coefficients of the crystal
// sideband ratio.
//
// Each coefficient is a ground-state expectation value of a string of
// collective operators J+- = sum_i eta_i sigma_i^+-. They are assembled here
// from elementary power sums s_k = sum_i eta_i^k and tabulated integer
// multiplicities of the distinct-index classes; `string_expectation` is the
// brute-force 2^N reference used to check the tables.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "icct/crystal.hpp"
#include "icct/error.hpp"

namespace icct {

/// Multiplicities of the distinct-index classes. Rows are C1..C5 and D1..D14.
struct TablePrefactors {
    // columns: eta^6 | eta^4 eta^2 | eta^2 eta^2 eta^2
    static constexpr std::array<std::array<int, 3>, 5> c_table{{
        {0, 4, 2},
        {1, 3, 1},
        {0, 4, 2},
        {0, 4, 4},
        {0, 0, 6},
    }};
    // columns: eta^8 | eta^6 eta^2 | eta^4 eta^4 | eta^4 eta^2 eta^2 | eta^2 x4
    static constexpr std::array<std::array<int, 5>, 14> d_table{{
        {0, 0, 0, 0, 24},
        {1, 4, 3, 6, 1},
        {0, 0, 0, 18, 18},
        {0, 0, 0, 24, 12},
        {0, 0, 0, 18, 6},
        {0, 0, 8, 16, 4},
        {0, 4, 4, 10, 2},
        {0, 0, 0, 24, 12},
        {0, 4, 4, 24, 8},
        {0, 4, 4, 16, 4},
        {0, 0, 0, 18, 6},
        {0, 4, 4, 16, 4},
        {0, 4, 4, 10, 2},
        {0, 4, 4, 10, 2},
    }};
};

/// Operator strings defining each coefficient, written left to right as in
/// <0| ... |0>; the rightmost operator acts first.
struct CoefficientPatterns {
    static constexpr std::string_view a = "-+";
    static constexpr std::string_view b1 = "-+-+";
    static constexpr std::string_view b2 = "--++";
    static constexpr std::array<std::string_view, 5> c{
        "--++-+", "-+-+-+", "-+--++", "--+-++", "---+++",
    };
    static constexpr std::array<std::string_view, 14> d{
        "----++++", "-+-+-+-+", "---+-+++", "--+--+++", "-+---+++",
        "--++--++", "-+-+--++", "---++-++", "--+-+-++", "-+--+-++",
        "---+++-+", "--+-++-+", "-+--++-+", "--++-+-+",
    };
};

/// Elementary power sums and the ordered distinct-index sums built from them
/// by inclusion-exclusion, e.g. sum_{i!=j} eta_i^4 eta_j^2 = s4 s2 - s6.
template <class Real = double>
struct PowerSums {
    Real s2{0}, s4{0}, s6{0}, s8{0};
    Real c42{0}, c222{0};                      // sixth-order classes
    Real d62{0}, d44{0}, d422{0}, d2222{0};    // eighth-order classes
};

template <class Real = double>
PowerSums<Real> power_sums(const std::vector<Real>& eta) {
    PowerSums<Real> ps;
    for (const Real& e : eta) {
        const Real x = e * e;
        ps.s2 += x;
        ps.s4 += x * x;
        ps.s6 += x * x * x;
        ps.s8 += x * x * x * x;
    }
    const Real& p1 = ps.s2;
    const Real& p2 = ps.s4;
    const Real& p3 = ps.s6;
    const Real& p4 = ps.s8;
    ps.c42 = p2 * p1 - p3;
    ps.c222 = p1 * p1 * p1 - Real(3) * p2 * p1 + Real(2) * p3;
    ps.d62 = p3 * p1 - p4;
    ps.d44 = p2 * p2 - p4;
    ps.d422 = p2 * (p1 * p1 - p2) - Real(2) * p3 * p1 + Real(2) * p4;
    ps.d2222 = p1 * p1 * p1 * p1 - Real(6) * p2 * p1 * p1 + Real(3) * p2 * p2 + Real(8) * p3 * p1 - Real(6) * p4;
    return ps;
}

template <class Real = double>
struct CoefficientSet {
    Real a{0};
    Real b1{0}, b2{0};
    std::array<Real, 5> c{};
    std::array<Real, 14> d{};

    /// C1 + C3 + 2 C4 + 3 C5, the combination that recurs in P3 and P4.
    Real c_combo() const { return c[0] + c[2] + Real(2) * c[3] + Real(3) * c[4]; }
};

template <class Real = double>
CoefficientSet<Real> coefficients_from_sums(const PowerSums<Real>& ps) {
    CoefficientSet<Real> cs;
    cs.a = ps.s2;
    cs.b1 = ps.s2 * ps.s2;
    cs.b2 = Real(2) * (ps.s2 * ps.s2 - ps.s4);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& row = TablePrefactors::c_table[i];
        cs.c[i] = Real(row[0]) * ps.s6 + Real(row[1]) * ps.c42 + Real(row[2]) * ps.c222;
    }
    for (std::size_t i = 0; i < 14; ++i) {
        const auto& row = TablePrefactors::d_table[i];
        cs.d[i] = Real(row[0]) * ps.s8 + Real(row[1]) * ps.d62 + Real(row[2]) * ps.d44 +
                  Real(row[3]) * ps.d422 + Real(row[4]) * ps.d2222;
    }
    return cs;
}

/// <0| O_1 ... O_k |0> for O in {J+, J-}, evaluated on the dense 2^N spin
/// space. Reference implementation; cost O(k N 2^N).
inline double string_expectation(const std::vector<double>& eta, std::string_view pattern, std::size_t max_ions = 12) {
    const std::size_t n = eta.size();
    if (n == 0) throw Error(ErrorCode::InvalidInput, "empty mode vector");
    if (n > max_ions) throw Error(ErrorCode::DimensionCap, "string oracle limited to N <= " + std::to_string(max_ions));
    const std::size_t dim = std::size_t{1} << n;
    std::vector<double> psi(dim, 0.0), next(dim);
    psi[0] = 1.0;
    for (std::size_t k = pattern.size(); k-- > 0;) {
        const char op = pattern[k];
        if (op != '+' && op != '-') throw Error(ErrorCode::InvalidInput, "pattern must contain only '+' and '-'");
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < dim; ++s) {
            if (psi[s] == 0.0) continue;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t bit = std::size_t{1} << i;
                const bool up = (s & bit) != 0;
                if (op == '+' && !up) next[s | bit] += eta[i] * psi[s];
                if (op == '-' && up) next[s & ~bit] += eta[i] * psi[s];
            }
        }
        psi.swap(next);
    }
    return psi[0];
}

/// Every coefficient evaluated through `string_expectation`.
inline CoefficientSet<double> coefficient_set_by_strings(const std::vector<double>& eta) {
    CoefficientSet<double> cs;
    cs.a = string_expectation(eta, CoefficientPatterns::a);
    cs.b1 = string_expectation(eta, CoefficientPatterns::b1);
    cs.b2 = string_expectation(eta, CoefficientPatterns::b2);
    for (std::size_t i = 0; i < 5; ++i) cs.c[i] = string_expectation(eta, CoefficientPatterns::c[i]);
    for (std::size_t i = 0; i < 14; ++i) cs.d[i] = string_expectation(eta, CoefficientPatterns::d[i]);
    return cs;
}

/// Flattened view (A, B1, B2, C1..C5, D1..D14).
template <class Real>
std::array<Real, 22> flatten(const CoefficientSet<Real>& cs) {
    std::array<Real, 22> out{};
    out[0] = cs.a;
    out[1] = cs.b1;
    out[2] = cs.b2;
    for (std::size_t i = 0; i < 5; ++i) out[3 + i] = cs.c[i];
    for (std::size_t i = 0; i < 14; ++i) out[8 + i] = cs.d[i];
    return out;
}

inline const std::array<std::string, 22>& coefficient_names() {
    static const std::array<std::string, 22> names{
        "A",  "B1", "B2", "C1", "C2", "C3", "C4", "C5", "D1", "D2", "D3",
        "D4", "D5", "D6", "D7", "D8", "D9", "D10", "D11", "D12", "D13", "D14",
    };
    return names;
}

/// Compares the tabulated assembly with the operator-string reference on a
/// fixed random 3-ion mode. Returns the largest absolute discrepancy.
inline double table_self_check_error() {
    std::mt19937_64 rng(0x5eed1e55u);
    std::normal_distribution<double> gauss;
    std::vector<double> eta(3);
    double norm = 0.0;
    for (auto& e : eta) {
        e = gauss(rng);
        norm += e * e;
    }
    for (auto& e : eta) e /= std::sqrt(norm);
    const auto fast = flatten(coefficients_from_sums(power_sums(eta)));
    const auto slow = flatten(coefficient_set_by_strings(eta));
    double err = 0.0;
    for (std::size_t i = 0; i < 22; ++i) err = std::max(err, std::abs(fast[i] - slow[i]));
    return err;
}

namespace detail {
inline void ensure_tables_verified() {
    static const bool verified = [] {
        if (table_self_check_error() > 1e-12)
            throw Error(ErrorCode::InvalidInput, "coefficient tables disagree with the operator-string reference");
        return true;
    }();
    (void)verified;
}
}  // namespace detail

template <class Real = double>
CoefficientSet<Real> coefficient_set(const std::vector<Real>& eta) {
    detail::ensure_tables_verified();
    return coefficients_from_sums(power_sums(eta));
}

inline CoefficientSet<double> coefficient_set(const ModeSpec& mode) { return coefficient_set(mode.eta); }

}  // namespace icct
