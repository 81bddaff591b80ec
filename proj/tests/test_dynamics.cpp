#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "icct/dynamics.hpp"
#include "icct/ratio.hpp"
#include "oracles/dense_propagation.hpp"
#include "support.hpp"

using namespace icct;

namespace {
std::vector<double> grid(double hi, int points) {
    std::vector<double> g;
    for (int k = 0; k <= points; ++k) g.push_back(hi * k / points);
    return g;
}
}  // namespace

TEST(Dynamics, SingleIonMatchesClosedForm) {
    const auto g = grid(6.0, 60);
    for (double nbar : {0.05, 0.3, 2.0}) {
        const auto red = exact_flop(com_mode(1), SidebandKind::Red, nbar, g);
        const auto blue = exact_flop(com_mode(1), SidebandKind::Blue, nbar, g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const SidebandPair p = single_ion_flops(nbar, g[i]);
            EXPECT_NEAR(red.p_global[i], p.red, 1e-10);
            EXPECT_NEAR(blue.p_global[i], p.blue, 1e-10);
            EXPECT_NEAR(red.p_mean[i], red.p_global[i], 1e-10);
        }
    }
}

TEST(Dynamics, BlocksMatchUnrestrictedPropagation) {
    std::mt19937_64 rng(17);
    for (std::size_t n_ions = 1; n_ions <= 3; ++n_ions) {
        const auto eta = testing_support::random_unit(n_ions, rng);
        for (auto kind : {SidebandKind::Red, SidebandKind::Blue}) {
            for (std::size_t n = 0; n <= 4; ++n) {
                const auto spec = block_spectrum(sideband_block(eta, kind, n), 3.0);
                for (double gt : {0.0, 0.4, 1.1, 2.5}) {
                    const auto want = oracle::survival_amplitude(eta, kind == SidebandKind::Blue, n, gt);
                    EXPECT_LT(std::abs(spec.amplitude(gt) - want), 1e-8) << "N=" << n_ions << " n=" << n << " gt=" << gt;
                }
            }
        }
    }
}

TEST(Dynamics, MeanExcitationMatchesDense) {
    const std::vector<double> eta{0.3, -0.5, std::sqrt(1.0 - 0.34)};
    for (auto kind : {SidebandKind::Red, SidebandKind::Blue}) {
        PropagationOptions opts;
        opts.with_excitations = true;
        for (std::size_t n : {0u, 2u, 5u}) {
            const auto spec = block_spectrum(sideband_block(eta, kind, n), 2.0, opts);
            for (double gt : {0.3, 1.7}) EXPECT_NEAR(spec.mean_excitations(gt), oracle::excitation_number(eta, kind == SidebandKind::Blue, n, gt), 1e-9);
        }
    }
}

TEST(Dynamics, DenseExponentialCrossCheck) {
    std::mt19937_64 rng(23);
    const auto eta = testing_support::random_unit(5, rng);
    for (auto kind : {SidebandKind::Red, SidebandKind::Blue}) {
        const auto block = sideband_block(eta, kind, 3);
        const auto spec = block_spectrum(block, 2.0);
        for (double gt : {0.2, 1.0, 2.0}) EXPECT_LT(std::abs(spec.amplitude(gt) - survival_amplitude_dense(block, gt)), 1e-10);
    }
}

TEST(Dynamics, NormConservedAndProbabilitiesBounded) {
    std::mt19937_64 rng(29);
    const auto eta = testing_support::random_unit(6, rng);
    for (auto kind : {SidebandKind::Red, SidebandKind::Blue}) {
        for (std::size_t n : {0u, 3u, 9u}) {
            const auto spec = block_spectrum(sideband_block(eta, kind, n), 4.0);
            double w = 0.0;
            for (double c : spec.components) w += c * c;
            EXPECT_NEAR(w, 1.0, 1e-10);
            for (double gt = 0.0; gt <= 4.0; gt += 0.1) {
                EXPECT_LE(std::abs(spec.amplitude(gt)), 1.0 + 1e-10);
                EXPECT_GE(spec.complement(gt), -1e-12);
            }
        }
    }
}

TEST(Dynamics, ConservedBlockDimensions) {
    // red: a^dag a + J0 = n fixes the block to states with at most n excitations
    const std::vector<double> eta(4, 0.5);
    for (std::size_t n = 0; n <= 5; ++n) {
        std::size_t want = 0;
        for (std::size_t k = 0; k <= std::min<std::size_t>(n, 4); ++k) {
            std::size_t c = 1;
            for (std::size_t j = 0; j < k; ++j) c = c * (4 - j) / (j + 1);
            want += c;
        }
        EXPECT_EQ(sideband_block(eta, SidebandKind::Red, n).excitations.size(), want);
        EXPECT_EQ(sideband_block(eta, SidebandKind::Blue, n).excitations.size(), 16u);
    }
}

TEST(Dynamics, ShortTimeExpansion) {
    std::mt19937_64 rng(31);
    const auto eta = testing_support::random_unit(4, rng);
    const double gt = 1e-4;
    for (std::size_t n : {1u, 2u, 6u}) {
        const auto red = block_spectrum(sideband_block(eta, SidebandKind::Red, n), 1.0);
        const auto blue = block_spectrum(sideband_block(eta, SidebandKind::Blue, n), 1.0);
        EXPECT_NEAR(red.complement(gt) / (gt * gt), static_cast<double>(n), 1e-6 * n);
        EXPECT_NEAR(blue.complement(gt) / (gt * gt), static_cast<double>(n + 1), 1e-6 * (n + 1));
    }
}

TEST(Dynamics, DickeMatchesFullSpace) {
    const auto g = grid(1.0, 50);
    for (std::size_t n_ions = 2; n_ions <= 6; ++n_ions) {
        for (auto kind : {SidebandKind::Red, SidebandKind::Blue}) {
            const auto full = exact_flop(com_mode(n_ions), kind, 0.3, g);
            const auto dicke = com_dicke_flop(n_ions, kind, 0.3, g);
            for (std::size_t i = 0; i < g.size(); ++i) {
                EXPECT_LT(std::abs(full.p_global[i] - dicke.p_global[i]), 1e-10);
                EXPECT_LT(std::abs(full.p_mean[i] - dicke.p_mean[i]), 1e-10);
            }
        }
    }
}

TEST(Dynamics, PermutationInvariance) {
    std::mt19937_64 rng(37);
    auto eta = testing_support::random_unit(5, rng);
    const auto g = grid(2.0, 20);
    const auto a = exact_flop(make_mode_spec(eta, 1.0, "a"), SidebandKind::Red, 0.4, g);
    std::reverse(eta.begin(), eta.end());
    std::swap(eta[0], eta[2]);
    eta[1] = -eta[1];
    const auto b = exact_flop(make_mode_spec(eta, 1.0, "b"), SidebandKind::Red, 0.4, g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(a.p_global[i], b.p_global[i], 1e-11);
}

TEST(Dynamics, OracleDerivativeAndLevels) {
    const SidebandOracle o = SidebandOracle::for_nbar(com_mode(3), SidebandKind::Blue, 2.0, 1.0);
    const double h = 1e-5;
    const std::size_t top = thermal::tail_cutoff(0.5 + 1e-3);
    const double fd = (o.probability_levels(0.5 + h, 1.2, top) - o.probability_levels(0.5 - h, 1.2, top)) / (2 * h);
    EXPECT_NEAR(o.probability_derivative(0.5, 1.2), fd, 1e-6);
    EXPECT_THROW(o.probability(0.5, 2.5), Error);
}

TEST(Dynamics, Guards) {
    EXPECT_THROW(SidebandOracle(com_mode(13), SidebandKind::Red, 1.0, 2, SidebandOracle::Method::Full), Error);
    EXPECT_THROW(SidebandOracle(make_mode_spec({1.0, 2.0}, 1.0, "x"), SidebandKind::Red, 1.0, 2, SidebandOracle::Method::Dicke), Error);
    EXPECT_NO_THROW(SidebandOracle(com_mode(40), SidebandKind::Red, 1.0, 2));
    EXPECT_THROW(exact_flop(com_mode(2), SidebandKind::Red, -0.1, {0.1}), Error);
}

TEST(Dynamics, BichromaticClosedFormMatchesTruncatedSimulation) {
    const ModeSpec two = make_mode_spec({0.6, 0.8}, 1.0, "pair");
    for (double nbar : {0.1, 1.0})
        for (double gt : {0.2, 0.8, 1.6}) {
            const double want = bichromatic_excitation(two.eta[1], nbar, gt);
            const std::size_t fock = thermal::tail_cutoff(nbar) + static_cast<std::size_t>(10.0 * std::sqrt(nbar + 1.0)) + 20;
            const double a = oracle::bichromatic_probability(two.eta[1], nbar, gt, fock);
            const double b = oracle::bichromatic_probability(two.eta[1], nbar, gt, 2 * fock);
            EXPECT_NEAR(a, b, 1e-10);
            EXPECT_NEAR(a, want, 1e-9);
        }
    const double h = 1e-6;
    EXPECT_NEAR(bichromatic_excitation_derivative(0.5, 0.3, 1.0),
                (bichromatic_excitation(0.5, 0.3 + h, 1.0) - bichromatic_excitation(0.5, 0.3 - h, 1.0)) / (2 * h), 1e-8);
}
