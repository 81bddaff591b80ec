#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "icct/coefficients.hpp"
#include "support.hpp"

using namespace icct;

namespace {

// Distinct-index sums by explicit loops, the construction the closed forms replace.
PowerSums<double> loop_sums(const std::vector<double>& eta) {
    const std::size_t n = eta.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = eta[i] * eta[i];
    PowerSums<double> s;
    for (std::size_t i = 0; i < n; ++i) {
        s.s2 += x[i];
        s.s4 += x[i] * x[i];
        s.s6 += x[i] * x[i] * x[i];
        s.s8 += x[i] * x[i] * x[i] * x[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            s.c42 += x[i] * x[i] * x[j];
            s.d62 += x[i] * x[i] * x[i] * x[j];
            s.d44 += x[i] * x[i] * x[j] * x[j];
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                s.c222 += x[i] * x[j] * x[k];
                s.d422 += x[i] * x[i] * x[j] * x[k];
                for (std::size_t l = 0; l < n; ++l) {
                    if (l == i || l == j || l == k) continue;
                    s.d2222 += x[i] * x[j] * x[k] * x[l];
                }
            }
        }
    }
    return s;
}

}  // namespace

TEST(Coefficients, ClosedFormSumsMatchLoops) {
    std::mt19937_64 rng(5);
    for (std::size_t n = 1; n <= 7; ++n) {
        const auto eta = testing_support::random_unit(n, rng);
        const auto a = power_sums(eta);
        const auto b = loop_sums(eta);
        EXPECT_NEAR(a.c42, b.c42, 1e-14);
        EXPECT_NEAR(a.c222, b.c222, 1e-14);
        EXPECT_NEAR(a.d62, b.d62, 1e-14);
        EXPECT_NEAR(a.d44, b.d44, 1e-14);
        EXPECT_NEAR(a.d422, b.d422, 1e-14);
        EXPECT_NEAR(a.d2222, b.d2222, 1e-14);
    }
}

TEST(Coefficients, FormulaMatchesOperatorStrings) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 6);
        const auto eta = testing_support::random_unit(n, rng);
        const auto fast = flatten(coefficient_set(eta));
        const auto slow = flatten(coefficient_set_by_strings(eta));
        for (std::size_t i = 0; i < 22; ++i) EXPECT_NEAR(fast[i], slow[i], 1e-10) << coefficient_names()[i] << " N=" << n;
    }
}

TEST(Coefficients, SelfCheckPasses) { EXPECT_LT(table_self_check_error(), 1e-12); }

TEST(Coefficients, LowOrderClosedForms) {
    std::mt19937_64 rng(2);
    const auto eta = testing_support::random_unit(5, rng);
    double s4 = 0.0;
    for (double e : eta) s4 += std::pow(e, 4);
    const auto cs = coefficient_set(eta);
    EXPECT_NEAR(cs.a, 1.0, 1e-14);
    EXPECT_NEAR(cs.b1, 1.0, 1e-14);
    EXPECT_NEAR(cs.b2, 2.0 * (1.0 - s4), 1e-14);
}

TEST(Coefficients, SingleIonHasOnlyDiagonalStrings) {
    const auto cs = coefficient_set(std::vector<double>{1.0});
    EXPECT_DOUBLE_EQ(cs.b2, 0.0);
    // J-J+ products survive; any double raising vanishes
    EXPECT_NEAR(cs.c[1], 1.0, 1e-15);
    EXPECT_NEAR(cs.c[0], 0.0, 1e-15);
    EXPECT_NEAR(cs.c[4], 0.0, 1e-15);
}

TEST(Coefficients, HomogeneousInEta) {
    std::mt19937_64 rng(3);
    const auto eta = testing_support::random_unit(5, rng);
    const double lambda = 1.37;
    std::vector<double> scaled(eta);
    for (auto& e : scaled) e *= lambda;
    const auto a = coefficients_from_sums(power_sums(eta));
    const auto b = coefficients_from_sums(power_sums(scaled));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(b.c[i], std::pow(lambda, 6) * a.c[i], 1e-12 * (1 + std::abs(b.c[i])));
    for (std::size_t i = 0; i < 14; ++i) EXPECT_NEAR(b.d[i], std::pow(lambda, 8) * a.d[i], 1e-12 * (1 + std::abs(b.d[i])));
}

TEST(Coefficients, PermutationAndSignSymmetry) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        auto eta = testing_support::random_unit(6, rng);
        const auto ref = flatten(coefficient_set(eta));
        std::shuffle(eta.begin(), eta.end(), rng);
        for (std::size_t i = 0; i < eta.size(); ++i)
            if (rng() & 1) eta[i] = -eta[i];
        const auto got = flatten(coefficient_set(eta));
        for (std::size_t i = 0; i < 22; ++i) EXPECT_NEAR(got[i], ref[i], 1e-13);
        const auto strings = flatten(coefficient_set_by_strings(eta));
        for (std::size_t i = 0; i < 22; ++i) EXPECT_NEAR(strings[i], ref[i], 1e-12);
    }
}

TEST(Coefficients, StringOracleGuards) {
    EXPECT_THROW(string_expectation({}, "-+"), Error);
    EXPECT_THROW(string_expectation({1.0}, "-x+"), Error);
    EXPECT_THROW(string_expectation(std::vector<double>(13, 0.1), "-+"), Error);
    EXPECT_NEAR(string_expectation({0.6, 0.8}, "-+"), 1.0, 1e-15);
    EXPECT_NEAR(string_expectation({0.6, 0.8}, "+-"), 0.0, 1e-15);
}

TEST(Coefficients, NamesAreStable) {
    EXPECT_EQ(coefficient_names().front(), "A");
    EXPECT_EQ(coefficient_names()[7], "C5");
    EXPECT_EQ(coefficient_names().back(), "D14");
}
