// sampling.hpp: exact sideband probabilities for a mode, cutoff times of the
// truncated ratio, and seeded Monte Carlo campaigns.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "icct/crystal.hpp"
#include "icct/dynamics.hpp"
#include "icct/error.hpp"
#include "icct/parallel.hpp"
#include "icct/ratio.hpp"
#include "icct/records.hpp"

namespace icct {

/// Red and blue oracles of one mode, valid for gt <= gt_max and thermal
/// states up to nbar_max.
class SidebandModel {
public:
    SidebandModel(const ModeSpec& mode, double gt_max, double nbar_max,
                  SidebandOracle::Method method = SidebandOracle::Method::Auto)
        : mode_(mode),
          red_(SidebandOracle::for_nbar(mode, SidebandKind::Red, gt_max, nbar_max, method)),
          blue_(SidebandOracle::for_nbar(mode, SidebandKind::Blue, gt_max, nbar_max, method)) {}

    SidebandPair operator()(double nbar, double gt) const { return {red_.probability(nbar, gt), blue_.probability(nbar, gt)}; }

    const ModeSpec& mode() const { return mode_; }
    const SidebandOracle& red() const { return red_; }
    const SidebandOracle& blue() const { return blue_; }
    double gt_max() const { return red_.gt_max(); }

private:
    ModeSpec mode_;
    SidebandOracle red_;
    SidebandOracle blue_;
};

// ---------------------------------------------------------------------------
// cutoff time

inline constexpr double kTwoPi = 6.283185307179586;

/// Grid values are angular gt; the defaults span 0..0.6 cycles of g t / 2pi
/// in steps of 0.005 cycles, refined to 1e-4 cycles.
struct CutoffOptions {
    double epsilon{5e-3};
    bool relative{false};    // deviation measured relative to nbar
    double gt_max{0.6 * kTwoPi};
    double gt_step{0.005 * kTwoPi};
    double refine{1e-4 * kTwoPi};
};

struct CutoffResult {
    std::string mode_label;
    double nbar{0.0};
    double gt_star{0.0};  // angular
    double epsilon{0.0};
    bool reached_grid_max{false};  // deviation never exceeded epsilon

    double gt_star_cycles() const { return gt_star / kTwoPi; }
};

/// Deviation of the inverted truncated ratio from the truth when fed exact
/// probabilities; infinity where no admissible root exists.
inline double inversion_deviation(const RatioPolynomial<double>& poly, const SidebandModel& model, double nbar, double gt, bool relative) {
    const SidebandPair p = model(nbar, gt);
    if (!(p.blue > p.red)) return std::numeric_limits<double>::infinity();
    try {
        const double est = invert_ratio(poly, p.red / (p.blue - p.red), gt);
        const double dev = std::abs(est - nbar);
        return relative ? dev / nbar : dev;
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline CutoffResult cutoff_time(const SidebandModel& model, double nbar, const CutoffOptions& opts = {}) {
    if (!(nbar > 0.0)) throw Error(ErrorCode::InvalidInput, "cutoff time needs nbar > 0");
    if (model.gt_max() < opts.gt_max * (1.0 - 1e-12)) throw Error(ErrorCode::InvalidInput, "model does not cover the cutoff grid");
    const RatioPolynomial<double> poly = ratio_polynomial(model.mode());
    CutoffResult result{model.mode().label, nbar, opts.gt_max, opts.epsilon, true};
    const auto steps = static_cast<std::size_t>(std::llround(opts.gt_max / opts.gt_step));
    double previous = 0.0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double gt = std::min(opts.gt_max, static_cast<double>(k) * opts.gt_step);
        if (inversion_deviation(poly, model, nbar, gt, opts.relative) > opts.epsilon) {
            double lo = previous, hi = gt;
            while (hi - lo > opts.refine) {
                const double mid = 0.5 * (lo + hi);
                if (inversion_deviation(poly, model, nbar, mid, opts.relative) > opts.epsilon)
                    hi = mid;
                else
                    lo = mid;
            }
            result.gt_star = std::max(0.5 * (lo + hi), opts.refine);
            result.reached_grid_max = false;
            return result;
        }
        previous = gt;
    }
    return result;
}

inline CutoffResult cutoff_time(const ModeSpec& mode, double nbar, const CutoffOptions& opts = {}) {
    const SidebandModel model(mode, opts.gt_max, nbar);
    return cutoff_time(model, nbar, opts);
}

// ---------------------------------------------------------------------------
// random numbers

/// SplitMix64 stream whose state is derived from a key (seed, a, b, c), so a
/// draw depends only on its logical position, never on scheduling.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
        state_ = mix(seed ^ 0x6a09e667f3bcc909ull);
        state_ = mix(state_ ^ a);
        state_ = mix(state_ ^ (b + 0x9e3779b97f4a7c15ull));
        state_ = mix(state_ ^ (c + 0xbb67ae8584caa73bull));
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

inline std::int64_t binomial_draw(CounterRng& rng, std::int64_t shots, double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return shots;
    std::binomial_distribution<std::int64_t> dist(shots, p);
    return dist(rng);
}

// ---------------------------------------------------------------------------
// campaigns

struct CampaignConfig {
    ModeSpec mode;
    double nbar_true{0.1};
    std::vector<double> gt_grid;
    std::int64_t shots_per_sideband{200};
    std::uint64_t seed{1};
    std::int64_t trials{1};
};

/// Exact (P_r, P_b) at a given gt for the campaign's true nbar.
using ProbabilitySource = std::function<SidebandPair(double gt)>;

inline ProbabilitySource exact_source(const SidebandModel& model, double nbar) {
    return [&model, nbar](double gt) { return model(nbar, gt); };
}

inline std::vector<SidebandRecord> sample_campaign(const CampaignConfig& config, const std::vector<SidebandPair>& probabilities,
                                                   std::uint64_t trial) {
    if (config.shots_per_sideband < 1) throw Error(ErrorCode::InvalidInput, "shots per sideband must be >= 1");
    if (probabilities.size() != config.gt_grid.size()) throw Error(ErrorCode::InvalidInput, "probabilities do not cover the gt grid");
    std::vector<SidebandRecord> records;
    records.reserve(config.gt_grid.size());
    for (std::size_t k = 0; k < config.gt_grid.size(); ++k) {
        CounterRng red_rng(config.seed, k, trial, 0);
        CounterRng blue_rng(config.seed, k, trial, 1);
        SidebandRecord rec;
        rec.t = config.gt_grid[k] / config.mode.g;
        rec.shots_red = config.shots_per_sideband;
        rec.shots_blue = config.shots_per_sideband;
        rec.excited_red = binomial_draw(red_rng, rec.shots_red, probabilities[k].red);
        rec.excited_blue = binomial_draw(blue_rng, rec.shots_blue, probabilities[k].blue);
        records.push_back(rec);
    }
    return records;
}

inline std::vector<SidebandRecord> sample_campaign(const CampaignConfig& config, const ProbabilitySource& oracle, std::uint64_t trial = 0) {
    std::vector<SidebandPair> probabilities;
    probabilities.reserve(config.gt_grid.size());
    for (double gt : config.gt_grid) probabilities.push_back(oracle(gt));
    return sample_campaign(config, probabilities, trial);
}

struct MomentValidation {
    double gt{0.0};
    double p_red{0.0};
    double p_blue{0.0};
    double noiseless_estimate{0.0};  // inversion of the exact ratio
    double empirical_bias{0.0};      // mean estimate - truth
    double sampling_bias{0.0};       // mean estimate - noiseless estimate
    double empirical_variance{0.0};
    double predicted_bias{0.0};
    double predicted_variance{0.0};
    std::int64_t used_trials{0};
    std::int64_t dropped_trials{0};  // f_r >= f_b or no admissible root
};

/// Runs the raw ratio estimator (inversion, no bias correction) over
/// `trials` seeded campaigns and compares its moments per grid point with
/// the asymptotic formulas evaluated at the exact probabilities. For a
/// crystal the mean also carries the truncation offset of R_t, so the
/// finite-sample part is reported separately as sampling_bias.
inline std::vector<MomentValidation> validate_estimator_moments(const CampaignConfig& config, const ProbabilitySource& oracle) {
    if (config.trials < 2) throw Error(ErrorCode::InvalidInput, "need at least two trials");
    const RatioPolynomial<double> poly = ratio_polynomial(config.mode);
    const std::size_t points = config.gt_grid.size();
    std::vector<SidebandPair> probabilities;
    for (double gt : config.gt_grid) probabilities.push_back(oracle(gt));

    const auto trials = static_cast<std::size_t>(config.trials);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> estimates(trials * points, nan);
    parallel_for(trials, [&](std::size_t trial) {
        const auto records = sample_campaign(config, probabilities, trial);
        for (std::size_t k = 0; k < points; ++k) {
            const double fr = records[k].f_red();
            const double fb = records[k].f_blue();
            if (!(fb > fr)) continue;
            try {
                estimates[trial * points + k] = invert_ratio(poly, fr / (fb - fr), config.gt_grid[k]);
            } catch (const Error&) {
            }
        }
    });

    const double shots = 2.0 * static_cast<double>(config.shots_per_sideband);
    std::vector<MomentValidation> out;
    for (std::size_t k = 0; k < points; ++k) {
        MomentValidation mv;
        mv.gt = config.gt_grid[k];
        mv.p_red = probabilities[k].red;
        mv.p_blue = probabilities[k].blue;
        double sum = 0.0;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            const double e = estimates[trial * points + k];
            if (std::isnan(e)) {
                ++mv.dropped_trials;
                continue;
            }
            sum += e;
            ++mv.used_trials;
        }
        const double mean = mv.used_trials > 0 ? sum / static_cast<double>(mv.used_trials) : nan;
        double ss = 0.0;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            const double e = estimates[trial * points + k];
            if (!std::isnan(e)) ss += (e - mean) * (e - mean);
        }
        mv.empirical_bias = mean - config.nbar_true;
        mv.noiseless_estimate = nan;
        if (mv.p_blue > mv.p_red) {
            try {
                mv.noiseless_estimate = invert_ratio(poly, mv.p_red / (mv.p_blue - mv.p_red), mv.gt);
            } catch (const Error&) {
            }
        }
        mv.sampling_bias = mean - mv.noiseless_estimate;
        mv.empirical_variance = mv.used_trials > 1 ? ss / static_cast<double>(mv.used_trials - 1) : nan;
        const double r1 = poly.derivative(config.nbar_true, mv.gt);
        const double r2 = poly.second_derivative(config.nbar_true, mv.gt);
        try {
            mv.predicted_bias = crystal_bias(mv.p_red, mv.p_blue, r1, r2, shots);
            mv.predicted_variance = crystal_variance(mv.p_red, mv.p_blue, r1, shots);
        } catch (const Error&) {
            mv.predicted_bias = nan;
            mv.predicted_variance = nan;
        }
        out.push_back(mv);
    }
    return out;
}

inline std::vector<MomentValidation> validate_estimator_moments(const CampaignConfig& config) {
    double gt_max = 0.0;
    for (double gt : config.gt_grid) gt_max = std::max(gt_max, gt);
    const SidebandModel model(config.mode, std::max(gt_max, 1e-12), config.nbar_true);
    return validate_estimator_moments(config, exact_source(model, config.nbar_true));
}

// ---------------------------------------------------------------------------
// mean-excitation versus global-excitation ratio

struct NaiveDemoRow {
    double gt{0.0};
    double mean_red{0.0};
    double mean_blue{0.0};
    double naive_ratio{0.0};    // mean_red / (mean_blue - mean_red)
    double global_red{0.0};
    double global_blue{0.0};
    double global_ratio{0.0};   // P_r / (P_b - P_r)
    double global_estimate{0.0};  // R_t^{-1}(global_ratio); NaN when no admissible root
};

inline std::vector<NaiveDemoRow> naive_vs_global_demo(std::size_t n_ions, double nbar, const std::vector<double>& gt_grid) {
    double gt_max = 0.0;
    for (double gt : gt_grid) gt_max = std::max(gt_max, gt);
    const ModeSpec mode = com_mode(n_ions);
    PropagationOptions opts;
    opts.with_excitations = true;
    const auto red = SidebandOracle::for_nbar(mode, SidebandKind::Red, std::max(gt_max, 1e-12), nbar, SidebandOracle::Method::Dicke, opts);
    const auto blue = SidebandOracle::for_nbar(mode, SidebandKind::Blue, std::max(gt_max, 1e-12), nbar, SidebandOracle::Method::Dicke, opts);
    const RatioPolynomial<double> poly = ratio_polynomial(mode);
    std::vector<NaiveDemoRow> rows;
    for (double gt : gt_grid) {
        NaiveDemoRow row;
        row.gt = gt;
        row.mean_red = red.mean_excitation(nbar, gt);
        row.mean_blue = blue.mean_excitation(nbar, gt);
        row.naive_ratio = row.mean_red / (row.mean_blue - row.mean_red);
        row.global_red = red.probability(nbar, gt);
        row.global_blue = blue.probability(nbar, gt);
        row.global_ratio = row.global_red / (row.global_blue - row.global_red);
        row.global_estimate = std::numeric_limits<double>::quiet_NaN();
        if (row.global_blue > row.global_red) {
            try {
                row.global_estimate = invert_ratio(poly, row.global_ratio, gt);
            } catch (const Error&) {
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace icct
