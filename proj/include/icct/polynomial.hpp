// polynomial.hpp: dense univariate polynomials and companion-matrix roots

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

namespace icct {

/// Polynomial with coefficients stored in ascending powers: c[0] + c[1] x + ...
template <class Real = double>
class Polynomial {
public:
    Polynomial() : c_{Real(0)} {}
    Polynomial(std::initializer_list<Real> coeffs) : c_(coeffs) {
        if (c_.empty()) c_.push_back(Real(0));
    }
    explicit Polynomial(std::vector<Real> coeffs) : c_(std::move(coeffs)) {
        if (c_.empty()) c_.push_back(Real(0));
    }

    std::size_t degree() const { return c_.size() - 1; }
    const std::vector<Real>& coefficients() const { return c_; }
    Real operator[](std::size_t k) const { return k < c_.size() ? c_[k] : Real(0); }

    template <class T>
    T operator()(const T& x) const {
        T acc = T(c_.back());
        for (std::size_t k = c_.size() - 1; k-- > 0;) acc = acc * x + T(c_[k]);
        return acc;
    }

    Polynomial derivative() const {
        if (c_.size() == 1) return Polynomial{Real(0)};
        std::vector<Real> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * Real(static_cast<int>(k));
        return Polynomial(std::move(d));
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        std::vector<Real> r(std::max(a.c_.size(), b.c_.size()), Real(0));
        for (std::size_t k = 0; k < r.size(); ++k) r[k] = a[k] + b[k];
        return Polynomial(std::move(r));
    }
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
        return a + b * Real(-1);
    }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        std::vector<Real> r(a.c_.size() + b.c_.size() - 1, Real(0));
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
        return Polynomial(std::move(r));
    }
    friend Polynomial operator*(const Polynomial& a, const Real& s) {
        std::vector<Real> r = a.c_;
        for (auto& v : r) v *= s;
        return Polynomial(std::move(r));
    }
    friend Polynomial operator*(const Real& s, const Polynomial& a) { return a * s; }

private:
    std::vector<Real> c_;
};

/// All complex roots via eigenvalues of the companion matrix. Leading
/// coefficients below `trim` times the largest magnitude are dropped first,
/// which only discards roots far outside the scale of the others.
inline std::vector<std::complex<double>> polynomial_roots(const Polynomial<double>& p, double trim = 1e-15) {
    std::vector<double> c = p.coefficients();
    double scale = 0.0;
    for (double v : c) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return {};
    while (c.size() > 1 && std::abs(c.back()) <= trim * scale) c.pop_back();
    const std::size_t deg = c.size() - 1;
    if (deg == 0) return {};
    if (deg == 1) return {std::complex<double>(-c[0] / c[1], 0.0)};

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(deg), static_cast<Eigen::Index>(deg));
    for (std::size_t i = 1; i < deg; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    for (std::size_t i = 0; i < deg; ++i)
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(deg - 1)) = -c[i] / c[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    std::vector<std::complex<double>> roots;
    roots.reserve(deg);
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) roots.push_back(solver.eigenvalues()(i));
    return roots;
}

}  // namespace icct
