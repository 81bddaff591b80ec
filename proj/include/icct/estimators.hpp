// estimators.hpp: temperature estimators built on the ratio polynomial, the
// exact dynamics and the bichromatic closed form, plus Fisher information
// and Cramer-Rao curves.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "icct/crystal.hpp"
#include "icct/dynamics.hpp"
#include "icct/error.hpp"
#include "icct/ratio.hpp"
#include "icct/records.hpp"
#include "icct/sampling.hpp"

namespace icct {

// ---------------------------------------------------------------------------
// weighted combination

struct WeightedMean {
    double mean{0.0};
    double sigma{0.0};
};

/// Inverse-variance weighted mean; sigma^-2 = sum variance^-1.
inline WeightedMean weighted_mean(const std::vector<double>& values, const std::vector<double>& variances) {
    if (values.empty() || values.size() != variances.size()) throw Error(ErrorCode::InvalidInput, "weighted mean needs matching, non-empty inputs");
    double sw = 0.0, swx = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(variances[i] > 0.0) || !std::isfinite(variances[i])) throw Error(ErrorCode::InvalidInput, "variances must be finite and > 0");
        const double w = 1.0 / variances[i];
        sw += w;
        swx += w * values[i];
    }
    return {swx / sw, 1.0 / std::sqrt(sw)};
}

/// sum (n - n_i)^2 / sigma_i^2, minimized by weighted_mean.
inline double weighted_objective(double n, const std::vector<double>& values, const std::vector<double>& variances) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += (n - values[i]) * (n - values[i]) / variances[i];
    return s;
}

// ---------------------------------------------------------------------------
// sideband-ratio estimator

struct RatioEstimatorOptions {
    bool bias_correction{true};
    bool pooled_weights{true};   // second pass: weights from the pooled estimate
    bool outlier_filter{false};  // drop estimates further than one sample std from the mean
    InversionOptions inversion{};
};

inline void validate_record(const SidebandRecord& rec) {
    if (rec.shots_red <= 0 || rec.shots_blue <= 0) throw Error(ErrorCode::InvalidInput, "shot counts must be > 0");
    if (rec.excited_red < 0 || rec.excited_blue < 0 || rec.excited_red > rec.shots_red || rec.excited_blue > rec.shots_blue)
        throw Error(ErrorCode::InvalidInput, "excited counts must lie in [0, shots]");
    if (!(rec.t >= 0.0) || !std::isfinite(rec.t)) throw Error(ErrorCode::InvalidInput, "record time must be finite and >= 0");
}

/// Estimate from a single sideband pair. Throws Error on an unusable pair;
/// the message is the discard reason.
inline EstimateAtTime estimate_at_time(const RatioPolynomial<double>& poly, double gt, double f_red, double f_blue, std::int64_t shots_red,
                                       std::int64_t shots_blue, bool bias_correction, const InversionOptions& inversion = {}) {
    EstimateAtTime e;
    e.gt = gt;
    e.f_red = f_red;
    e.f_blue = f_blue;
    e.shots_red = shots_red;
    e.shots_blue = shots_blue;
    if (!(f_blue > f_red)) throw Error(ErrorCode::DegenerateSidebands, "f_r >= f_b");
    if (f_red == 0.0) throw Error(ErrorCode::DegenerateSidebands, "f_r = 0 gives a zero variance estimate");
    e.ratio = f_red / (f_blue - f_red);
    e.nbar_raw = invert_ratio(poly, e.ratio, gt, inversion);
    const double shots = static_cast<double>(shots_red + shots_blue);
    const double r1 = poly.derivative(e.nbar_raw, gt);
    const double r2 = poly.second_derivative(e.nbar_raw, gt);
    if (!(r1 > 0.0)) throw Error(ErrorCode::NoAdmissibleRoot, "ratio polynomial not increasing at the estimate");
    e.bias = crystal_bias(f_red, f_blue, r1, r2, shots);
    e.variance = crystal_variance(f_red, f_blue, r1, shots);
    e.nbar_hat = bias_correction ? e.nbar_raw - e.bias : e.nbar_raw;
    if (!(e.variance > 0.0) || !std::isfinite(e.variance)) throw Error(ErrorCode::DegenerateSidebands, "non-positive variance estimate");
    return e;
}

inline EstimateReport estimate_sideband_ratio(const ModeSpec& mode, const std::vector<SidebandRecord>& records, double cutoff_gt,
                                              const RatioEstimatorOptions& opts = {}) {
    if (!(cutoff_gt > 0.0)) throw Error(ErrorCode::InvalidInput, "cutoff gt must be > 0");
    const RatioPolynomial<double> poly = ratio_polynomial(mode);
    EstimateReport report;
    report.cutoff_gt = cutoff_gt;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const SidebandRecord& rec = records[i];
        validate_record(rec);
        const double gt = mode.g * rec.t;
        if (gt > cutoff_gt) {
            report.discarded.push_back({i, gt, "beyond cutoff"});
            continue;
        }
        try {
            EstimateAtTime e = estimate_at_time(poly, gt, rec.f_red(), rec.f_blue(), rec.shots_red, rec.shots_blue, opts.bias_correction, opts.inversion);
            e.record_index = i;
            e.t = rec.t;
            report.per_time.push_back(e);
        } catch (const Error& err) {
            report.discarded.push_back({i, gt, err.what()});
        }
    }
    if (report.per_time.empty()) throw Error(ErrorCode::NoUsableRecords, "no usable sideband records at or below the cutoff");

    auto combine = [&report] {
        std::vector<double> v, var;
        for (const auto& e : report.per_time) {
            v.push_back(e.nbar_hat);
            var.push_back(e.variance);
        }
        const WeightedMean wm = weighted_mean(v, var);
        report.nbar_final = wm.mean;
        report.sigma_final = wm.sigma;
    };
    combine();

    // Variances from the measured frequencies correlate with the estimates
    // (a low f_r gives a low estimate and a small variance), which drags the
    // weighted mean down. The second pass keeps each measured f_b - f_r but
    // moves the sideband pair onto the pooled ratio before evaluating B4.
    if (opts.pooled_weights) {
        const double pooled = std::max(report.nbar_final, 0.0);
        for (auto& e : report.per_time) {
            const double d = e.f_blue - e.f_red;
            const double pr = poly.value(pooled, e.gt) * d;
            const double pb = pr + d;
            const double r1 = poly.derivative(pooled, e.gt);
            if (pooled > 0.0 && pr > 0.0 && pb < 1.0 && r1 > 0.0)
                e.variance = crystal_variance(pr, pb, r1, static_cast<double>(e.shots_red + e.shots_blue));
        }
        combine();
    }

    if (opts.outlier_filter && report.per_time.size() > 2) {
        double mean = 0.0;
        for (const auto& e : report.per_time) mean += e.nbar_hat;
        mean /= static_cast<double>(report.per_time.size());
        double ss = 0.0;
        for (const auto& e : report.per_time) ss += (e.nbar_hat - mean) * (e.nbar_hat - mean);
        const double sd = std::sqrt(ss / static_cast<double>(report.per_time.size() - 1));
        std::vector<EstimateAtTime> kept;
        for (const auto& e : report.per_time) {
            if (std::abs(e.nbar_hat - report.nbar_final) > sd)
                report.discarded.push_back({e.record_index, e.gt, "outside one standard deviation"});
            else
                kept.push_back(e);
        }
        if (!kept.empty()) {
            report.per_time = std::move(kept);
            combine();
        }
        std::sort(report.discarded.begin(), report.discarded.end(),
                  [](const DiscardedRecord& a, const DiscardedRecord& b) { return a.record_index < b.record_index; });
    }
    return report;
}

// ---------------------------------------------------------------------------
// weighted least-squares fit

struct FitPoint {
    double gt{0.0};
    double value{0.0};
    double sigma{1.0};
    int channel{0};  // passed to the model, e.g. 0 = red, 1 = blue
};

struct FitResult {
    double nbar_hat{0.0};
    double variance{0.0};
    double objective_at_min{0.0};
    std::size_t points_used{0};
};

struct FitOptions {
    double beta{0.317};
    std::size_t scan_points{200};
};

using FitModel = std::function<double(int channel, double gt, double nbar)>;

/// Binomial error of a measured frequency, regularized so that 0 and 1
/// counts keep a finite weight.
inline double binomial_sigma(std::int64_t excited, std::int64_t shots) {
    const double p = (static_cast<double>(excited) + 0.5) / (static_cast<double>(shots) + 1.0);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(shots));
}

/// F(d1, d2) quantile at probability p.
inline double f_quantile(double d1, double d2, double p) {
    return boost::math::quantile(boost::math::fisher_f_distribution<double>(d1, d2), p);
}

inline FitResult fit_estimator(const FitModel& model, std::vector<FitPoint> points, std::pair<double, double> bracket, const FitOptions& opts = {}) {
    if (points.size() < 2) throw Error(ErrorCode::InvalidInput, "fit needs at least two points");
    auto [lo, hi] = bracket;
    if (!(lo >= 0.0 && hi > lo)) throw Error(ErrorCode::InvalidInput, "fit bracket must satisfy 0 <= lo < hi");
    for (const auto& p : points)
        if (!(p.sigma > 0.0) || !std::isfinite(p.value)) throw Error(ErrorCode::InvalidInput, "fit points need finite values and sigma > 0");
    // canonical order, so the sums do not depend on the input order
    std::sort(points.begin(), points.end(), [](const FitPoint& a, const FitPoint& b) {
        return std::tie(a.channel, a.gt, a.value, a.sigma) < std::tie(b.channel, b.gt, b.value, b.sigma);
    });
    auto objective = [&](double nbar) {
        double s = 0.0;
        for (const auto& p : points) {
            const double d = (model(p.channel, p.gt, nbar) - p.value) / p.sigma;
            s += d * d;
        }
        return s;
    };

    const std::size_t K = std::max<std::size_t>(opts.scan_points, 3);
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
        const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(K - 1);
        const double v = objective(x);
        if (v < best_value) {
            best_value = v;
            best = k;
        }
    }
    const double step = (hi - lo) / static_cast<double>(K - 1);
    const double a = std::max(lo, lo + step * (static_cast<double>(best) - 1.0));
    const double b = std::min(hi, lo + step * (static_cast<double>(best) + 1.0));
    std::uintmax_t iterations = 200;
    const auto [x_min, s_min] = boost::math::tools::brent_find_minima(objective, a, b, std::numeric_limits<double>::digits, iterations);
    const double edge_tol = 1e-6 * (hi - lo);
    if ((best == 0 && lo > 0.0 && x_min - lo < edge_tol) || (best == K - 1 && hi - x_min < edge_tol))
        throw Error(ErrorCode::BracketEdge, "fit minimum at the bracket edge");

    FitResult result;
    result.nbar_hat = x_min;
    result.objective_at_min = std::max(s_min, 0.0);
    result.points_used = points.size();
    const double h = 1e-4 * (1.0 + x_min);
    double info = 0.0;
    for (const auto& p : points) {
        double A;
        if (x_min - h >= 0.0)
            A = (model(p.channel, p.gt, x_min + h) - model(p.channel, p.gt, x_min - h)) / (2.0 * h);
        else
            A = (model(p.channel, p.gt, x_min + h) - model(p.channel, p.gt, x_min)) / h;
        info += (A / p.sigma) * (A / p.sigma);
    }
    const double m = static_cast<double>(points.size());
    const double s_l = result.objective_at_min * (1.0 + f_quantile(1.0, m - 1.0, 1.0 - opts.beta) / (m - 1.0));
    result.variance = (s_l - result.objective_at_min) / info;
    return result;
}

/// Red-sideband points of a campaign with binomial error bars.
inline std::vector<FitPoint> red_fit_points(const ModeSpec& mode, const std::vector<SidebandRecord>& records) {
    std::vector<FitPoint> pts;
    for (const auto& rec : records) {
        validate_record(rec);
        pts.push_back({mode.g * rec.t, rec.f_red(), binomial_sigma(rec.excited_red, rec.shots_red), 0});
    }
    return pts;
}

// ---------------------------------------------------------------------------
// bichromatic estimator

struct BichromaticResult {
    double nbar_hat{0.0};
    double variance{0.0};
};

/// Maximum likelihood of x = 2 nbar + 1 under P = (1 - exp(-2 a x)) / 2 with
/// a = (gt eta)^2; variance from the observed information.
inline BichromaticResult estimate_bichromatic(double eta_i, const std::vector<BinomialRecord>& records) {
    if (!(eta_i != 0.0) || !std::isfinite(eta_i)) throw Error(ErrorCode::InvalidInput, "eta_i must be finite and non-zero");
    struct Term {
        double a, k, n;
    };
    std::vector<Term> terms;
    bool any_excited = false, any_below_half = false;
    for (const auto& r : records) {
        if (r.shots <= 0 || r.excited < 0 || r.excited > r.shots) throw Error(ErrorCode::InvalidInput, "invalid binomial record");
        const double a = (r.gt * eta_i) * (r.gt * eta_i);
        if (!(a > 0.0)) continue;
        const double f = static_cast<double>(r.excited) / static_cast<double>(r.shots);
        any_excited = any_excited || r.excited > 0;
        any_below_half = any_below_half || f < 0.5;
        terms.push_back({a, static_cast<double>(r.excited), static_cast<double>(r.shots)});
    }
    if (terms.empty() || !any_excited || !any_below_half) throw Error(ErrorCode::Uninformative, "bichromatic data carry no temperature information");

    auto score = [&](double x) {
        double s = 0.0;
        for (const auto& t : terms) {
            const double e = std::exp(-2.0 * t.a * x);
            const double p = 0.5 * (1.0 - e);
            const double dp = t.a * e;
            s += dp * (t.k / p - (t.n - t.k) / (1.0 - p));
        }
        return s;
    };
    double x_hat = 1.0;
    if (score(1.0) > 0.0) {
        double hi = 2.0;
        while (score(hi) > 0.0) {
            hi *= 2.0;
            if (hi > 1e12) throw Error(ErrorCode::Uninformative, "bichromatic likelihood has no finite maximum");
        }
        std::uintmax_t it = 200;
        const auto root = boost::math::tools::toms748_solve(score, hi == 2.0 ? 1.0 : hi / 2.0, hi,
                                                            boost::math::tools::eps_tolerance<double>(50), it);
        x_hat = 0.5 * (root.first + root.second);
    }
    double info = 0.0;
    for (const auto& t : terms) {
        const double e = std::exp(-2.0 * t.a * x_hat);
        const double p = 0.5 * (1.0 - e);
        const double d1 = t.a * e;
        const double d2 = -2.0 * t.a * t.a * e;
        info -= t.k * (d2 / p - d1 * d1 / (p * p)) + (t.n - t.k) * (-d2 / (1.0 - p) - d1 * d1 / ((1.0 - p) * (1.0 - p)));
    }
    if (!(info > 0.0)) throw Error(ErrorCode::Uninformative, "observed information is not positive");
    return {0.5 * (x_hat - 1.0), 0.25 / info};
}

// ---------------------------------------------------------------------------
// Fisher information

/// Two-outcome Fisher information per shot, dP^2 / (P (1 - P)).
inline double fisher_binary(double p, double dp) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidInput, "Fisher information needs 0 < P < 1");
    return dp * dp / (p * (1.0 - p));
}

/// Zeros of the single-ion blue-sideband Fisher information on (0, gt_max]:
/// sign changes of dP_b/dnbar, located by a grid scan and refined by TOMS 748.
inline std::vector<double> blue_fisher_zeros(double nbar, double gt_max, double step = 1e-3) {
    if (!(nbar > 0.0) || !(gt_max > 0.0) || !(step > 0.0)) throw Error(ErrorCode::InvalidInput, "need nbar, gt_max, step > 0");
    const std::size_t top = thermal::tail_cutoff(nbar, 1e-14);
    auto d = [&](double gt) { return single_ion_flops_derivative(nbar, gt, top).blue; };
    std::vector<double> zeros;
    double prev_t = step, prev = d(step);
    for (double t = 2.0 * step; t <= gt_max + 1e-12; t += step) {
        const double cur = d(t);
        if (cur == 0.0) {
            zeros.push_back(t);
        } else if ((prev < 0.0) != (cur < 0.0) && prev != 0.0) {
            std::uintmax_t it = 100;
            const auto r = boost::math::tools::toms748_solve(d, prev_t, t, prev, cur, boost::math::tools::eps_tolerance<double>(50), it);
            zeros.push_back(0.5 * (r.first + r.second));
        }
        prev_t = t;
        prev = cur;
    }
    return zeros;
}

// ---------------------------------------------------------------------------
// Cramer-Rao curves

/// x = 2 (gt eta)^2 (2 nbar + 1) maximizing the bichromatic information,
/// the root of 1 - exp(-2x) = x.
inline double bichromatic_optimal_exponent() {
    auto f = [](double x) { return 1.0 - std::exp(-2.0 * x) - x; };
    std::uintmax_t it = 100;
    const auto r = boost::math::tools::toms748_solve(f, 0.5, 1.0, boost::math::tools::eps_tolerance<double>(52), it);
    return 0.5 * (r.first + r.second);
}

/// Per-shot bichromatic Fisher information at exponent x.
inline double bichromatic_fisher(double nbar, double x) {
    const double s = 2.0 * nbar + 1.0;
    return 4.0 * x * x / (s * s * std::expm1(2.0 * x));
}

struct CrbRow {
    double nbar{0.0};
    double cutoff_gt{0.0};
    double estimator_sigma{0.0};   // sqrt(variance * shots) at the best gt <= cutoff
    double estimator_gt{0.0};
    double sideband_sigma{0.0};    // 1 / sqrt(F), red and blue with shots/2 each
    double sideband_gt{0.0};
    double bichromatic_sigma{0.0};
    double bichromatic_gt{0.0};    // for the ion with the largest |eta|
};

struct CrbOptions {
    double gt_scan_max{3.141592653589793};
    double gt_step{0.005};
    double fd_step{1e-4};
    CutoffOptions cutoff{};
};

inline std::vector<CrbRow> crb_curves(const ModeSpec& mode, const std::vector<double>& nbar_grid, const CrbOptions& opts = {}) {
    if (nbar_grid.empty()) return {};
    double nbar_max = 0.0;
    for (double n : nbar_grid) {
        if (!(n > 0.0)) throw Error(ErrorCode::InvalidInput, "nbar grid values must be > 0");
        nbar_max = std::max(nbar_max, n);
    }
    const double gt_max = std::max(opts.gt_scan_max, opts.cutoff.gt_max);
    const SidebandModel model(mode, gt_max, nbar_max + 2.0 * opts.fd_step);
    const RatioPolynomial<double> poly = ratio_polynomial(mode);
    double eta_max = 0.0;
    for (double e : mode.eta) eta_max = std::max(eta_max, std::abs(e));
    const double x_opt = bichromatic_optimal_exponent();
    const auto steps = static_cast<std::size_t>(std::floor(opts.gt_scan_max / opts.gt_step + 1e-9));

    std::vector<CrbRow> rows(nbar_grid.size());
    parallel_for(nbar_grid.size(), [&](std::size_t i) {
        const double nbar = nbar_grid[i];
        CrbRow row;
        row.nbar = nbar;
        row.cutoff_gt = cutoff_time(model, nbar, opts.cutoff).gt_star;
        const double h = opts.fd_step;
        const std::size_t top = thermal::tail_cutoff(nbar + h);
        double best_est = std::numeric_limits<double>::infinity(), best_crb = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k <= steps; ++k) {
            const double gt = static_cast<double>(k) * opts.gt_step;
            const double pr = model.red().probability_levels(nbar, gt, top);
            const double pb = model.blue().probability_levels(nbar, gt, top);
            const double dpr = (model.red().probability_levels(nbar + h, gt, top) - model.red().probability_levels(nbar - h, gt, top)) / (2.0 * h);
            const double dpb = (model.blue().probability_levels(nbar + h, gt, top) - model.blue().probability_levels(nbar - h, gt, top)) / (2.0 * h);
            if (pr > 0.0 && pr < 1.0 && pb > 0.0 && pb < 1.0) {
                const double f = 0.5 * (fisher_binary(pr, dpr) + fisher_binary(pb, dpb));
                if (f > 0.0 && 1.0 / std::sqrt(f) < best_crb) {
                    best_crb = 1.0 / std::sqrt(f);
                    row.sideband_gt = gt;
                }
            }
            if (gt <= row.cutoff_gt && pb - pr >= 1e-12 && pr > 0.0) {
                const double v = crystal_variance(pr, pb, poly.derivative(nbar, gt), 1.0);
                if (std::sqrt(v) < best_est) {
                    best_est = std::sqrt(v);
                    row.estimator_gt = gt;
                }
            }
        }
        row.estimator_sigma = best_est;
        row.sideband_sigma = best_crb;
        row.bichromatic_sigma = 1.0 / std::sqrt(bichromatic_fisher(nbar, x_opt));
        row.bichromatic_gt = eta_max > 0.0 ? std::sqrt(x_opt / (2.0 * eta_max * eta_max * (2.0 * nbar + 1.0))) : 0.0;
        rows[i] = row;
    });
    return rows;
}

// ---------------------------------------------------------------------------
// heating rate

struct LinearFit {
    double slope{0.0};
    double slope_sigma{0.0};
    double intercept{0.0};
    double intercept_sigma{0.0};
    double chi2{0.0};
};

/// Weighted straight-line fit y = intercept + slope x.
inline LinearFit weighted_linear_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& sigma) {
    if (x.size() < 2 || x.size() != y.size() || x.size() != sigma.size()) throw Error(ErrorCode::InvalidInput, "linear fit needs >= 2 matching points");
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(sigma[i] > 0.0)) throw Error(ErrorCode::InvalidInput, "sigma must be > 0");
        const double w = 1.0 / (sigma[i] * sigma[i]);
        s += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    const double det = s * sxx - sx * sx;
    if (!(det > 0.0)) throw Error(ErrorCode::InvalidInput, "degenerate abscissae");
    LinearFit fit;
    fit.slope = (s * sxy - sx * sy) / det;
    fit.intercept = (sxx * sy - sx * sxy) / det;
    fit.slope_sigma = std::sqrt(s / det);
    fit.intercept_sigma = std::sqrt(sxx / det);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = (y[i] - fit.intercept - fit.slope * x[i]) / sigma[i];
        fit.chi2 += r * r;
    }
    return fit;
}

}  // namespace icct
