// app.hpp: the icct command-line program. Kept in a header so the tests can
// drive it in-process.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "icct/coefficients.hpp"
#include "icct/crystal.hpp"
#include "icct/dynamics.hpp"
#include "icct/error.hpp"
#include "icct/estimators.hpp"
#include "icct/io.hpp"
#include "icct/parallel.hpp"
#include "icct/ratio.hpp"
#include "icct/sampling.hpp"

namespace icct::app {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kSuccess = 0, kUsage = 1, kDataError = 2 };

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Grid as "start:stop:step" (inclusive) or a comma-separated list.
inline std::vector<double> parse_grid(const std::string& spec) {
    auto to_double = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidInput, "bad number '" + s + "' in grid '" + spec + "'");
        }
    };
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw Error(ErrorCode::InvalidInput, "grid range must be start:stop:step");
        const double a = to_double(parts[0]), b = to_double(parts[1]), h = to_double(parts[2]);
        if (!(h > 0.0) || b < a) throw Error(ErrorCode::InvalidInput, "grid range needs step > 0 and stop >= start");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9));
        for (std::size_t k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * h);
    } else {
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ',');)
            if (!p.empty()) out.push_back(to_double(p));
    }
    if (out.empty()) throw Error(ErrorCode::InvalidInput, "empty grid '" + spec + "'");
    return out;
}

/// Artifacts of one run: the JSON result printed on stdout, plus named files
/// written when an output directory is given.
struct RunOutput {
    json result;
    std::string stdout_text;  // replaces the JSON on stdout when non-empty
    std::map<std::string, std::string> files;
};

struct RunManifest {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::string tool_version{kToolVersion};
    std::string config_hash;

    json to_json() const {
        return {{"subcommand", subcommand}, {"inputs", inputs}, {"output_dir", output_dir},
                {"seed", seed ? json(*seed) : json(nullptr)}, {"tool_version", tool_version}, {"config_hash", config_hash}};
    }
};

namespace detail {

inline std::string csv_row(std::initializer_list<double> values) {
    std::string s;
    bool first = true;
    for (double v : values) {
        if (!first) s += ',';
        s += io::fmt(v);
        first = false;
    }
    return s + '\n';
}

/// Rough nbar from the raw single-ion ratios, used to place the cutoff.
inline double rough_nbar(const std::vector<SidebandRecord>& records) {
    std::vector<double> r;
    for (const auto& rec : records) {
        const double fr = rec.f_red(), fb = rec.f_blue();
        if (fb > fr && fr > 0.0) r.push_back(fr / (fb - fr));
    }
    if (r.empty()) throw Error(ErrorCode::NoUsableRecords, "no record with 0 < f_r < f_b");
    std::sort(r.begin(), r.end());
    return std::clamp(r[r.size() / 2], 0.01, 5.0);
}

inline json fit_to_json(const FitResult& f) {
    return {{"method", "fit"}, {"nbar_hat", f.nbar_hat}, {"variance", f.variance}, {"sigma", std::sqrt(f.variance)},
            {"objective_at_min", f.objective_at_min}, {"points_used", f.points_used}};
}

inline json validation_to_json(const std::vector<MomentValidation>& rows, std::string* csv) {
    json arr = json::array();
    if (csv) *csv = "gt,p_red,p_blue,noiseless_estimate,empirical_bias,sampling_bias,predicted_bias,empirical_variance,predicted_variance,used_trials,dropped_trials\n";
    for (const auto& m : rows) {
        arr.push_back({{"gt", m.gt}, {"p_red", m.p_red}, {"p_blue", m.p_blue}, {"noiseless_estimate", m.noiseless_estimate},
                       {"empirical_bias", m.empirical_bias}, {"sampling_bias", m.sampling_bias}, {"predicted_bias", m.predicted_bias},
                       {"empirical_variance", m.empirical_variance}, {"predicted_variance", m.predicted_variance},
                       {"used_trials", m.used_trials}, {"dropped_trials", m.dropped_trials}});
        if (csv)
            *csv += csv_row({m.gt, m.p_red, m.p_blue, m.noiseless_estimate, m.empirical_bias, m.sampling_bias, m.predicted_bias,
                             m.empirical_variance, m.predicted_variance, static_cast<double>(m.used_trials), static_cast<double>(m.dropped_trials)});
    }
    return arr;
}

inline json crb_to_json(const std::vector<CrbRow>& rows, std::string* csv) {
    json arr = json::array();
    if (csv) *csv = "nbar,cutoff_gt,estimator_sigma,estimator_gt,sideband_crb_sigma,sideband_gt,bichromatic_crb_sigma,bichromatic_gt\n";
    for (const auto& r : rows) {
        arr.push_back({{"nbar", r.nbar}, {"cutoff_gt", r.cutoff_gt}, {"estimator_sigma", r.estimator_sigma}, {"estimator_gt", r.estimator_gt},
                       {"sideband_crb_sigma", r.sideband_sigma}, {"sideband_gt", r.sideband_gt},
                       {"bichromatic_crb_sigma", r.bichromatic_sigma}, {"bichromatic_gt", r.bichromatic_gt}});
        if (csv)
            *csv += csv_row({r.nbar, r.cutoff_gt, r.estimator_sigma, r.estimator_gt, r.sideband_sigma, r.sideband_gt, r.bichromatic_sigma, r.bichromatic_gt});
    }
    return arr;
}

inline json naive_to_json(const std::vector<NaiveDemoRow>& rows, std::string* csv) {
    json arr = json::array();
    if (csv) *csv = "gt,mean_red,mean_blue,naive_ratio,global_red,global_blue,global_ratio,global_estimate\n";
    for (const auto& r : rows) {
        arr.push_back({{"gt", r.gt}, {"mean_red", r.mean_red}, {"mean_blue", r.mean_blue}, {"naive_ratio", r.naive_ratio},
                       {"global_red", r.global_red}, {"global_blue", r.global_blue}, {"global_ratio", r.global_ratio},
                       {"global_estimate", std::isnan(r.global_estimate) ? json(nullptr) : json(r.global_estimate)}});
        if (csv) *csv += csv_row({r.gt, r.mean_red, r.mean_blue, r.naive_ratio, r.global_red, r.global_blue, r.global_ratio, r.global_estimate});
    }
    return arr;
}

inline SidebandOracle::Method parse_method(const std::string& m) {
    if (m == "auto") return SidebandOracle::Method::Auto;
    if (m == "full") return SidebandOracle::Method::Full;
    if (m == "dicke") return SidebandOracle::Method::Dicke;
    throw Error(ErrorCode::InvalidInput, "unknown propagation method '" + m + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// figure data

struct FigureFiles {
    std::map<std::string, std::string> files;
    json schema;
};

inline FigureFiles figure_fig2() {
    std::vector<double> grid;
    for (int k = 1; k <= 200; ++k) grid.push_back(0.01 * k);
    std::string csv;
    detail::naive_to_json(naive_vs_global_demo(19, 5.0, grid), &csv);
    FigureFiles f;
    f.files["fig2.csv"] = csv;
    f.schema["fig2.csv"] = {{"description", "19-ion COM mode at nbar = 5: mean-excitation ratio versus global ratio"},
                            {"columns",
                             {{"gt", "angular g t"},
                              {"mean_red", "mean excitation per ion, red sideband"},
                              {"mean_blue", "mean excitation per ion, blue sideband"},
                              {"naive_ratio", "mean_red / (mean_blue - mean_red)"},
                              {"global_red", "probability that any ion is excited, red"},
                              {"global_blue", "probability that any ion is excited, blue"},
                              {"global_ratio", "global_red / (global_blue - global_red)"},
                              {"global_estimate", "inversion of the ratio polynomial; nan where no admissible root"}}}};
    return f;
}

inline FigureFiles figure_fig3() {
    std::ostringstream os;
    os << "nbar,gt,p_red,p_blue,bias_times_shots,relative_sigma_sqrt_shots\n";
    for (double nbar : {0.1, 0.5}) {
        for (int k = 1; k <= 314; ++k) {
            const double gt = 0.01 * k;
            const SidebandPair p = single_ion_flops(nbar, gt);
            if (!(p.blue - p.red >= 1e-12)) continue;
            os << detail::csv_row({nbar, gt, p.red, p.blue, single_ion_bias(p.red, p.blue, 1.0),
                                   std::sqrt(single_ion_variance(p.red, p.blue, 1.0)) / nbar});
        }
    }
    FigureFiles f;
    f.files["fig3.csv"] = os.str();
    f.schema["fig3.csv"] = {{"description", "single-ion sideband-ratio estimator: bias and uncertainty rescaled to the total shot number"},
                            {"columns",
                             {{"nbar", "true mean phonon number"},
                              {"gt", "angular g t"},
                              {"p_red", "red sideband excitation probability"},
                              {"p_blue", "blue sideband excitation probability"},
                              {"bias_times_shots", "asymptotic bias times total shots"},
                              {"relative_sigma_sqrt_shots", "sqrt(variance * total shots) / nbar"}}}};
    return f;
}

inline FigureFiles figure_fig4(double anisotropy = 10.0, double nbar = 0.1) {
    std::ostringstream os;
    os << "n_ions,mode_index,is_com,frequency,gt_star,gt_star_cycles,reached_grid_max\n";
    for (std::size_t n = 4; n <= 12; ++n) {
        const auto modes = chain_modes({n, anisotropy, ChainAxis::Transverse});
        std::vector<CutoffResult> results(modes.size());
        parallel_for(modes.size(), [&](std::size_t k) {
            results[k] = cutoff_time(make_mode_spec(modes[k].eta_unit, 1.0, "m"), nbar);
        });
        for (std::size_t k = modes.size(); k-- > 0;) {
            const std::size_t index = modes.size() - k;  // 1 = highest frequency
            const bool com = is_uniform_mode(make_mode_spec(modes[k].eta_unit, 1.0, "m"), 1e-9) && k + 1 == modes.size();
            os << detail::csv_row({static_cast<double>(n), static_cast<double>(index), com ? 1.0 : 0.0, modes[k].frequency, results[k].gt_star,
                                   results[k].gt_star_cycles(), results[k].reached_grid_max ? 1.0 : 0.0});
        }
    }
    FigureFiles f;
    f.files["fig4.csv"] = os.str();
    f.schema["fig4.csv"] = {{"description", "cutoff time of every transverse mode of linear chains, N = 4..12, nbar = 0.1, absolute epsilon 5e-3"},
                            {"columns",
                             {{"n_ions", "number of ions"},
                              {"mode_index", "1 = highest frequency (COM)"},
                              {"is_com", "1 for the center-of-mass mode"},
                              {"frequency", "mode frequency in units of the axial trap frequency"},
                              {"gt_star", "angular cutoff g t*"},
                              {"gt_star_cycles", "gt_star / (2 pi)"},
                              {"reached_grid_max", "1 when the deviation never exceeded epsilon"}}}};
    return f;
}

inline FigureFiles figure_fig6() {
    std::vector<double> grid;
    for (int k = 0; k <= 30; ++k) grid.push_back(std::pow(10.0, -2.0 + 0.1 * k));
    std::string csv;
    detail::crb_to_json(crb_curves(com_mode(10), grid), &csv);
    FigureFiles f;
    f.files["fig6.csv"] = csv;
    f.schema["fig6.csv"] = {{"description", "10-ion COM mode: estimator uncertainty and Cramer-Rao bounds, all as sigma * sqrt(total shots)"},
                            {"columns",
                             {{"nbar", "mean phonon number"},
                              {"cutoff_gt", "angular cutoff time at this nbar"},
                              {"estimator_sigma", "minimal ratio-estimator uncertainty over gt <= cutoff"},
                              {"estimator_gt", "gt of that minimum"},
                              {"sideband_crb_sigma", "Cramer-Rao bound, red and blue with half the shots each"},
                              {"sideband_gt", "gt of that minimum"},
                              {"bichromatic_crb_sigma", "Cramer-Rao bound of single-ion bichromatic readout"},
                              {"bichromatic_gt", "optimal gt for the ion with the largest |eta|"}}}};
    return f;
}

// ---------------------------------------------------------------------------
// program

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sideband thermometry for trapped-ion crystals"};
    app.require_subcommand(1);
    unsigned threads = 0;
    std::string out_dir;
    app.add_option("--threads", threads, "worker threads (default: ICCT_THREADS or hardware)");

    RunManifest manifest;
    std::function<RunOutput()> action;

    auto add_out = [&](CLI::App* sub) { sub->add_option("--out", out_dir, "directory for result files and the run manifest"); };

    // modes
    std::size_t n_ions = 0;
    std::string axis = "transverse";
    double anisotropy = 10.0;
    std::vector<double> frequencies;
    double g_value = 1.0;
    std::string write_dir;
    {
        auto* sub = app.add_subcommand("modes", "normal modes of a linear chain");
        sub->add_option("--n", n_ions, "number of ions")->required()->check(CLI::Range(1, 200));
        sub->add_option("--axis", axis, "transverse or axial")->check(CLI::IsMember({"transverse", "axial"}));
        sub->add_option("--anisotropy", anisotropy, "transverse / axial trap frequency ratio");
        sub->add_option("--frequencies", frequencies, "measured transverse mode frequencies in Hz; fits the anisotropy")->delimiter(',');
        sub->add_option("--g", g_value, "sideband Rabi rate written into the mode files (rad/s)");
        sub->add_option("--write-dir", write_dir, "write one mode file per mode into this directory");
        add_out(sub);
        sub->callback([&] {
            action = [&]() -> RunOutput {
                const ChainAxis ax = axis == "axial" ? ChainAxis::Axial : ChainAxis::Transverse;
                double alpha = anisotropy;
                if (!frequencies.empty()) {
                    if (ax != ChainAxis::Transverse) throw Error(ErrorCode::InvalidInput, "--frequencies applies to transverse modes");
                    alpha = anisotropy_from_frequencies(n_ions, frequencies);
                }
                const auto modes = chain_modes({n_ions, alpha, ax});
                const double f_top = frequencies.empty() ? 0.0 : *std::max_element(frequencies.begin(), frequencies.end());
                const double scale = modes.empty() ? 1.0 : std::max_element(modes.begin(), modes.end(), [](auto& a, auto& b) { return a.frequency < b.frequency; })->frequency;
                RunOutput o;
                o.result = {{"n_ions", n_ions}, {"axis", axis}, {"anisotropy", alpha}, {"modes", json::array()}};
                std::vector<std::size_t> order(modes.size());
                std::iota(order.begin(), order.end(), 0);
                std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return modes[a].frequency > modes[b].frequency; });
                for (std::size_t r = 0; r < order.size(); ++r) {
                    const auto& m = modes[order[r]];
                    ModeSpec spec = make_mode_spec(m.eta_unit, g_value, "mode" + std::to_string(r + 1));
                    if (f_top > 0.0) spec.frequency = 2.0 * M_PI * f_top * m.frequency / scale;
                    json mj = io::mode_to_json(spec);
                    mj["frequency_axial_units"] = m.frequency;
                    o.result["modes"].push_back(mj);
                    if (!write_dir.empty()) {
                        fs::create_directories(write_dir);
                        io::write_text((fs::path(write_dir) / (spec.label + ".json")).string(), io::mode_to_json(spec).dump(2) + "\n");
                    }
                }
                return o;
            };
        });
    }

    // coeffs
    std::string mode_path;
    {
        auto* sub = app.add_subcommand("coeffs", "mode coefficients and ratio polynomial");
        sub->add_option("--mode", mode_path, "mode file")->required();
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {mode_path};
            action = [&]() -> RunOutput {
                const ModeSpec mode = io::read_mode(mode_path);
                const RatioPolynomial<double> poly = ratio_polynomial(mode);
                RunOutput o;
                o.result = {{"label", mode.label}, {"n_ions", mode.n_ions()}, {"coefficients", io::coefficients_to_json(poly.coefficients())},
                            {"P2", poly.p2().coefficients()}, {"P3", poly.p3().coefficients()}, {"P4", poly.p4().coefficients()}};
                return o;
            };
        });
    }

    // ratio-table
    std::string nbar_grid_spec, gt_grid_spec;
    {
        auto* sub = app.add_subcommand("ratio-table", "R_t(nbar) on a grid (CSV)");
        sub->add_option("--mode", mode_path, "mode file")->required();
        sub->add_option("--nbar-grid", nbar_grid_spec, "nbar grid, start:stop:step or list")->required();
        sub->add_option("--gt-grid", gt_grid_spec, "gt grid, start:stop:step or list")->required();
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {mode_path};
            action = [&]() -> RunOutput {
                const ModeSpec mode = io::read_mode(mode_path);
                const RatioPolynomial<double> poly = ratio_polynomial(mode);
                std::string csv = "nbar,gt,ratio,ratio_prime,ratio_second\n";
                for (double nbar : parse_grid(nbar_grid_spec))
                    for (double gt : parse_grid(gt_grid_spec))
                        csv += detail::csv_row({nbar, gt, poly.value(nbar, gt), poly.derivative(nbar, gt), poly.second_derivative(nbar, gt)});
                RunOutput o;
                o.stdout_text = csv;
                o.files["ratio_table.csv"] = csv;
                return o;
            };
        });
    }

    // simulate
    double nbar = 0.1;
    std::string sideband = "r", method = "auto";
    std::int64_t shots = 0;
    std::uint64_t seed = 1;
    {
        auto* sub = app.add_subcommand("simulate", "exact sideband flops (CSV) or a sampled measurement file");
        sub->add_option("--mode", mode_path, "mode file")->required();
        sub->add_option("--nbar", nbar, "mean phonon number")->required()->check(CLI::NonNegativeNumber);
        sub->add_option("--sideband", sideband, "r or b")->check(CLI::IsMember({"r", "b"}));
        sub->add_option("--gt-grid", gt_grid_spec, "gt grid, start:stop:step or list")->required();
        sub->add_option("--method", method, "auto, full or dicke")->check(CLI::IsMember({"auto", "full", "dicke"}));
        sub->add_option("--shots", shots, "shots per sideband; emits a sampled measurement file with both sidebands")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "random seed for --shots");
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {mode_path};
            if (shots > 0) manifest.seed = seed;
            action = [&]() -> RunOutput {
                const ModeSpec mode = io::read_mode(mode_path);
                const auto grid = parse_grid(gt_grid_spec);
                for (double gt : grid)
                    if (!(gt >= 0.0)) throw Error(ErrorCode::InvalidInput, "gt grid must be >= 0");
                RunOutput o;
                if (shots > 0) {
                    const double gt_max = std::max(*std::max_element(grid.begin(), grid.end()), 1e-12);
                    const SidebandModel model(mode, gt_max, nbar, detail::parse_method(method));
                    CampaignConfig cfg;
                    cfg.mode = mode;
                    cfg.nbar_true = nbar;
                    cfg.gt_grid = grid;
                    cfg.shots_per_sideband = shots;
                    cfg.seed = seed;
                    const auto records = sample_campaign(cfg, exact_source(model, nbar));
                    o.result = io::measurement_to_json(mode, records);
                    o.files["measurement.json"] = o.result.dump(2) + "\n";
                    return o;
                }
                const SidebandKind kind = sideband == "b" ? SidebandKind::Blue : SidebandKind::Red;
                const PropagationResult r = icct::detail::propagate(mode, kind, nbar, grid, detail::parse_method(method));
                std::string csv = "gt,P_global,P_mean\n";
                for (std::size_t i = 0; i < grid.size(); ++i) csv += detail::csv_row({grid[i], r.p_global[i], r.p_mean[i]});
                o.stdout_text = csv;
                o.files["flop.csv"] = csv;
                return o;
            };
        });
    }

    // estimate, fit, bichromatic
    std::string data_path, est_method = "ratio", csv_path;
    std::optional<double> cutoff_gt;
    bool outlier_filter = false, no_bias_correction = false, single_pass = false;
    std::vector<double> bracket{0.0, 2.0};
    std::optional<std::size_t> ion;
    auto run_estimate = [&](const std::string& which) -> RunOutput {
        const io::Measurement m = io::measurement_from_json(io::read_json(data_path));
        RunOutput o;
        if (which == "bichromatic") {
            const std::size_t i = ion.value_or(m.ion);
            if (i >= m.mode.n_ions()) throw Error(ErrorCode::InvalidInput, "ion index out of range");
            if (m.bichromatic.empty()) throw Error(ErrorCode::NoUsableRecords, "no bichromatic_records in the data file");
            const BichromaticResult b = estimate_bichromatic(m.mode.eta[i], m.bichromatic);
            o.result = {{"method", "bichromatic"}, {"ion", i}, {"nbar_hat", b.nbar_hat}, {"variance", b.variance}, {"sigma", std::sqrt(b.variance)}};
            return o;
        }
        if (m.records.empty()) throw Error(ErrorCode::NoUsableRecords, "measurement contains no sideband records");
        if (which == "fit") {
            if (bracket.size() != 2) throw Error(ErrorCode::InvalidInput, "--bracket takes lo,hi");
            double gt_max = 0.0;
            for (const auto& r : m.records) gt_max = std::max(gt_max, m.mode.g * r.t);
            const SidebandModel model(m.mode, std::max(gt_max, 1e-12), bracket[1] * 1.001 + 1e-3);
            const FitModel fm = [&](int, double gt, double n) { return model.red().probability(n, gt); };
            o.result = detail::fit_to_json(fit_estimator(fm, red_fit_points(m.mode, m.records), {bracket[0], bracket[1]}));
            return o;
        }
        double cut;
        json cutoff_info;
        if (cutoff_gt) {
            cut = *cutoff_gt;
            cutoff_info = {{"source", "given"}};
        } else {
            const double rough = detail::rough_nbar(m.records);
            const CutoffResult c = cutoff_time(m.mode, rough);
            cut = c.gt_star;
            cutoff_info = {{"source", "computed"}, {"at_nbar", rough}, {"gt_star_cycles", c.gt_star_cycles()}};
        }
        RatioEstimatorOptions opts;
        opts.bias_correction = !no_bias_correction;
        opts.outlier_filter = outlier_filter;
        opts.pooled_weights = !single_pass;
        const EstimateReport report = estimate_sideband_ratio(m.mode, m.records, cut, opts);
        o.result = io::report_to_json(report);
        o.result["cutoff"] = cutoff_info;
        o.files["per_time.csv"] = io::per_time_csv(report);
        if (!csv_path.empty()) io::write_text(csv_path, o.files["per_time.csv"]);
        return o;
    };
    {
        auto* sub = app.add_subcommand("estimate", "temperature estimate from a measurement file");
        sub->add_option("--data", data_path, "measurement file")->required();
        sub->add_option("--method", est_method, "ratio, fit or bichromatic")->check(CLI::IsMember({"ratio", "fit", "bichromatic"}));
        sub->add_option("--cutoff-gt", cutoff_gt, "angular cutoff; computed from the data when absent");
        sub->add_option("--csv", csv_path, "write per-time estimates as CSV");
        sub->add_flag("--outlier-filter", outlier_filter, "drop estimates outside one standard deviation");
        sub->add_flag("--no-bias-correction", no_bias_correction, "report uncorrected estimates");
        sub->add_flag("--single-pass-weights", single_pass, "weights from the measured frequencies only");
        sub->add_option("--bracket", bracket, "fit bracket lo,hi")->delimiter(',')->expected(2);
        sub->add_option("--ion", ion, "readout ion for the bichromatic method");
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {data_path};
            action = [&] { return run_estimate(est_method); };
        });
    }
    {
        auto* sub = app.add_subcommand("fit", "weighted least-squares fit of the red-sideband flop");
        sub->add_option("--data", data_path, "measurement file")->required();
        sub->add_option("--bracket", bracket, "nbar bracket lo,hi")->delimiter(',')->expected(2);
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {data_path};
            action = [&] { return run_estimate("fit"); };
        });
    }
    {
        auto* sub = app.add_subcommand("bichromatic", "maximum-likelihood estimate from bichromatic single-ion data");
        sub->add_option("--data", data_path, "measurement file with bichromatic_records")->required();
        sub->add_option("--ion", ion, "readout ion (default: the file's \"ion\" or 0)");
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {data_path};
            action = [&] { return run_estimate("bichromatic"); };
        });
    }

    // montecarlo
    std::string config_path;
    {
        auto* sub = app.add_subcommand("montecarlo", "Monte Carlo check of the estimator moments");
        sub->add_option("--config", config_path, "campaign configuration")->required();
        sub->add_option("--csv", csv_path, "write the comparison as CSV");
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {config_path};
            action = [&]() -> RunOutput {
                const CampaignConfig cfg = io::campaign_from_json(io::read_json(config_path), fs::path(config_path).parent_path().string());
                manifest.seed = cfg.seed;
                std::string csv;
                RunOutput o;
                o.result = {{"mode", io::mode_to_json(cfg.mode)}, {"nbar_true", cfg.nbar_true}, {"shots_per_sideband", cfg.shots_per_sideband},
                            {"trials", cfg.trials}, {"seed", cfg.seed}, {"rows", detail::validation_to_json(validate_estimator_moments(cfg), &csv)}};
                o.files["montecarlo.csv"] = csv;
                if (!csv_path.empty()) io::write_text(csv_path, csv);
                return o;
            };
        });
    }

    // cutoff
    double epsilon = 5e-3;
    bool epsilon_relative = false;
    {
        auto* sub = app.add_subcommand("cutoff", "cutoff time of the truncated ratio");
        sub->add_option("--mode", mode_path, "mode file")->required();
        sub->add_option("--nbar", nbar, "mean phonon number")->required()->check(CLI::PositiveNumber);
        sub->add_option("--epsilon", epsilon, "deviation threshold")->check(CLI::PositiveNumber);
        sub->add_flag("--epsilon-relative", epsilon_relative, "threshold relative to nbar");
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {mode_path};
            action = [&]() -> RunOutput {
                CutoffOptions opts;
                opts.epsilon = epsilon;
                opts.relative = epsilon_relative;
                RunOutput o;
                o.result = io::cutoff_to_json(cutoff_time(io::read_mode(mode_path), nbar, opts));
                return o;
            };
        });
    }

    // fisher
    double zeros_max = 6.0;
    {
        auto* sub = app.add_subcommand("fisher", "sideband Fisher information per shot");
        sub->add_option("--nbar", nbar, "mean phonon number")->required()->check(CLI::PositiveNumber);
        sub->add_option("--gt-grid", gt_grid_spec, "gt grid (default 0.01:3.14:0.01)");
        sub->add_option("--mode", mode_path, "mode file; single ion when absent");
        sub->add_option("--zeros-max", zeros_max, "scan range for single-ion blue-sideband zeros");
        sub->add_option("--csv", csv_path, "write the curves as CSV");
        add_out(sub);
        sub->callback([&] {
            if (!mode_path.empty()) manifest.inputs = {mode_path};
            action = [&]() -> RunOutput {
                const auto grid = parse_grid(gt_grid_spec.empty() ? "0.01:3.14:0.01" : gt_grid_spec);
                const double h = 1e-4;
                std::function<std::pair<SidebandPair, SidebandPair>(double)> eval;
                std::optional<SidebandModel> model;
                if (mode_path.empty()) {
                    const std::size_t top = thermal::tail_cutoff(nbar + h);
                    eval = [=](double gt) { return std::make_pair(single_ion_flops(nbar, gt, top), single_ion_flops_derivative(nbar, gt, top)); };
                } else {
                    model.emplace(io::read_mode(mode_path), std::max(*std::max_element(grid.begin(), grid.end()), 1e-12), nbar + 2 * h);
                    const std::size_t top = thermal::tail_cutoff(nbar + h);
                    eval = [&, top](double gt) {
                        const auto& red = model->red();
                        const auto& blue = model->blue();
                        SidebandPair p{red.probability_levels(nbar, gt, top), blue.probability_levels(nbar, gt, top)};
                        SidebandPair d{(red.probability_levels(nbar + h, gt, top) - red.probability_levels(nbar - h, gt, top)) / (2 * h),
                                       (blue.probability_levels(nbar + h, gt, top) - blue.probability_levels(nbar - h, gt, top)) / (2 * h)};
                        return std::make_pair(p, d);
                    };
                }
                std::string csv = "gt,p_red,p_blue,fisher_red,fisher_blue,fisher_combined\n";
                json rows = json::array();
                for (double gt : grid) {
                    const auto [p, d] = eval(gt);
                    if (!(p.red > 0 && p.red < 1 && p.blue > 0 && p.blue < 1)) continue;
                    const double fr = fisher_binary(p.red, d.red), fb = fisher_binary(p.blue, d.blue);
                    csv += detail::csv_row({gt, p.red, p.blue, fr, fb, 0.5 * (fr + fb)});
                    rows.push_back({{"gt", gt}, {"fisher_red", fr}, {"fisher_blue", fb}, {"fisher_combined", 0.5 * (fr + fb)}});
                }
                RunOutput o;
                o.result = {{"nbar", nbar}, {"rows", rows}};
                if (mode_path.empty()) {
                    const auto zeros = blue_fisher_zeros(nbar, zeros_max);
                    json zc = json::array();
                    for (double z : zeros) zc.push_back(z / kTwoPi);
                    o.result["blue_zeros_gt"] = zeros;
                    o.result["blue_zeros_cycles"] = zc;
                }
                o.files["fisher.csv"] = csv;
                if (!csv_path.empty()) io::write_text(csv_path, csv);
                return o;
            };
        });
    }

    // crb
    {
        auto* sub = app.add_subcommand("crb", "estimator uncertainty and Cramer-Rao bounds versus nbar");
        sub->add_option("--mode", mode_path, "mode file")->required();
        sub->add_option("--nbar-grid", nbar_grid_spec, "nbar grid, start:stop:step or list")->required();
        sub->add_option("--csv", csv_path, "write the curves as CSV");
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = {mode_path};
            action = [&]() -> RunOutput {
                std::string csv;
                RunOutput o;
                o.result = {{"rows", detail::crb_to_json(crb_curves(io::read_mode(mode_path), parse_grid(nbar_grid_spec)), &csv)}};
                o.files["crb.csv"] = csv;
                if (!csv_path.empty()) io::write_text(csv_path, csv);
                return o;
            };
        });
    }

    // demo-naive
    {
        auto* sub = app.add_subcommand("demo-naive", "mean-excitation ratio versus global ratio for a COM mode");
        sub->add_option("--n", n_ions, "number of ions")->required()->check(CLI::Range(1, 100000));
        sub->add_option("--nbar", nbar, "mean phonon number")->required()->check(CLI::PositiveNumber);
        sub->add_option("--gt-grid", gt_grid_spec, "gt grid (default 0.02:2:0.02)");
        sub->add_option("--csv", csv_path, "write the table as CSV");
        add_out(sub);
        sub->callback([&] {
            action = [&]() -> RunOutput {
                std::string csv;
                RunOutput o;
                o.result = {{"n_ions", n_ions}, {"nbar", nbar},
                            {"rows", detail::naive_to_json(naive_vs_global_demo(n_ions, nbar, parse_grid(gt_grid_spec.empty() ? "0.02:2:0.02" : gt_grid_spec)), &csv)}};
                o.files["demo_naive.csv"] = csv;
                if (!csv_path.empty()) io::write_text(csv_path, csv);
                return o;
            };
        });
    }

    // heating-fit
    std::vector<std::string> report_paths;
    std::vector<double> delays;
    {
        auto* sub = app.add_subcommand("heating-fit", "weighted linear fit of nbar versus delay");
        sub->add_option("--reports", report_paths, "estimate reports (JSON)")->required()->delimiter(',');
        sub->add_option("--delays", delays, "delay of each report in seconds")->required()->delimiter(',');
        add_out(sub);
        sub->callback([&] {
            manifest.inputs = report_paths;
            action = [&]() -> RunOutput {
                if (report_paths.size() != delays.size()) throw Error(ErrorCode::InvalidInput, "one delay per report is required");
                std::vector<double> y, s;
                for (const auto& p : report_paths) {
                    const EstimateReport r = io::report_from_json(io::read_json(p));
                    y.push_back(r.nbar_final);
                    s.push_back(r.sigma_final);
                }
                const LinearFit fit = weighted_linear_fit(delays, y, s);
                RunOutput o;
                o.result = {{"heating_rate_per_s", fit.slope}, {"heating_rate_sigma", fit.slope_sigma}, {"nbar_at_zero", fit.intercept},
                            {"nbar_at_zero_sigma", fit.intercept_sigma}, {"chi2", fit.chi2}, {"points", delays.size()}};
                return o;
            };
        });
    }

    // figures
    std::string which = "all";
    {
        auto* sub = app.add_subcommand("figures", "export figure data as CSV with a schema sidecar");
        sub->add_option("--which", which, "fig2, fig3, fig4, fig6 or all")->check(CLI::IsMember({"fig2", "fig3", "fig4", "fig6", "all"}));
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->callback([&] {
            action = [&]() -> RunOutput {
                RunOutput o;
                json schema;
                auto take = [&](FigureFiles f) {
                    for (auto& [name, text] : f.files) o.files[name] = text;
                    for (auto& [name, s] : f.schema.items()) schema[name] = s;
                };
                if (which == "fig2" || which == "all") take(figure_fig2());
                if (which == "fig3" || which == "all") take(figure_fig3());
                if (which == "fig4" || which == "all") take(figure_fig4());
                if (which == "fig6" || which == "all") take(figure_fig6());
                o.files["schema.json"] = schema.dump(2) + "\n";
                json names = json::array();
                for (const auto& [name, text] : o.files) names.push_back(name);
                o.result = {{"written", names}};
                return o;
            };
        });
    }

    std::vector<const char*> argv{"icct"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kSuccess;
        }
        err << app.get_name() << ": " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (threads > 0) set_thread_count(threads);
        manifest.subcommand = app.get_subcommands().front()->get_name();
        std::string joined;
        for (const auto& a : args) joined += a + '\x1f';
        manifest.config_hash = hex64(fnv1a(joined));
        manifest.output_dir = out_dir;
        RunOutput o = action();
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            for (const auto& [name, text] : o.files) io::write_text((fs::path(out_dir) / name).string(), text);
            if (!o.result.is_null()) io::write_text((fs::path(out_dir) / "result.json").string(), o.result.dump(2) + "\n");
            io::write_text((fs::path(out_dir) / "manifest.json").string(), manifest.to_json().dump(2) + "\n");
        }
        if (!o.stdout_text.empty())
            out << o.stdout_text;
        else
            out << o.result.dump(2) << "\n";
        return kSuccess;
    } catch (const Error& e) {
        err << json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        err << json{{"error", "InvalidInput"}, {"message", e.what()}}.dump() << "\n";
        return kDataError;
    }
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace icct::app
