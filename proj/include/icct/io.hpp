// io.hpp: JSON and CSV exchange formats.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icct/coefficients.hpp"
#include "icct/crystal.hpp"
#include "icct/error.hpp"
#include "icct/estimators.hpp"
#include "icct/records.hpp"
#include "icct/sampling.hpp"

namespace icct::io {

using nlohmann::json;

inline constexpr double kNormTolerance = 1e-3;

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline json read_json(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, path + ": " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path);
    out << text;
}

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

template <class T>
T get_field(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::InvalidInput, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("field '") + key + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// modes

/// Mode object {"label", "eta", "g_rad_per_s", "frequency_rad_per_s"?}.
/// eta is renormalized when sum eta^2 is within 1e-3 of one.
inline ModeSpec mode_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "mode must be a JSON object");
    const auto eta = get_field<std::vector<double>>(j, "eta");
    const double g = get_field<double>(j, "g_rad_per_s");
    const std::string label = j.value("label", std::string("mode"));
    if (eta.empty()) throw Error(ErrorCode::InvalidInput, "eta must not be empty");
    double norm2 = 0.0;
    for (double e : eta) {
        if (!std::isfinite(e)) throw Error(ErrorCode::InvalidInput, "eta entries must be finite");
        norm2 += e * e;
    }
    if (std::abs(norm2 - 1.0) > kNormTolerance)
        throw Error(ErrorCode::InvalidInput, "sum of eta^2 is " + fmt(norm2) + ", expected 1 within 1e-3");
    ModeSpec mode = make_mode_spec(eta, g, label);
    if (j.contains("frequency_rad_per_s") && !j.at("frequency_rad_per_s").is_null())
        mode.frequency = get_field<double>(j, "frequency_rad_per_s");
    return mode;
}

inline json mode_to_json(const ModeSpec& mode) {
    json j{{"label", mode.label}, {"eta", mode.eta}, {"g_rad_per_s", mode.g}};
    if (mode.frequency) j["frequency_rad_per_s"] = *mode.frequency;
    return j;
}

inline ModeSpec read_mode(const std::string& path) { return mode_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// measurements

inline SidebandRecord record_from_json(const json& j) {
    SidebandRecord r;
    r.t = get_field<double>(j, "t_s");
    r.shots_red = get_field<std::int64_t>(j, "shots_red");
    r.excited_red = get_field<std::int64_t>(j, "excited_red");
    r.shots_blue = get_field<std::int64_t>(j, "shots_blue");
    r.excited_blue = get_field<std::int64_t>(j, "excited_blue");
    validate_record(r);
    return r;
}

inline json record_to_json(const SidebandRecord& r) {
    return {{"t_s", r.t}, {"shots_red", r.shots_red}, {"excited_red", r.excited_red}, {"shots_blue", r.shots_blue}, {"excited_blue", r.excited_blue}};
}

struct Measurement {
    ModeSpec mode;
    std::vector<SidebandRecord> records;
    std::size_t ion{0};                          // bichromatic readout ion
    std::vector<BinomialRecord> bichromatic;     // gt filled from t_s and g
};

inline Measurement measurement_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "measurement must be a JSON object");
    Measurement m;
    m.mode = mode_from_json(get_field<json>(j, "mode"));
    if (j.contains("records"))
        for (const auto& r : j.at("records")) m.records.push_back(record_from_json(r));
    if (j.contains("ion")) m.ion = get_field<std::size_t>(j, "ion");
    if (j.contains("bichromatic_records")) {
        for (const auto& r : j.at("bichromatic_records")) {
            BinomialRecord b;
            b.gt = m.mode.g * get_field<double>(r, "t_s");
            b.shots = get_field<std::int64_t>(r, "shots");
            b.excited = get_field<std::int64_t>(r, "excited");
            m.bichromatic.push_back(b);
        }
    }
    return m;
}

inline json measurement_to_json(const ModeSpec& mode, const std::vector<SidebandRecord>& records) {
    json recs = json::array();
    for (const auto& r : records) recs.push_back(record_to_json(r));
    return {{"mode", mode_to_json(mode)}, {"records", recs}};
}

// ---------------------------------------------------------------------------
// results

inline json coefficients_to_json(const CoefficientSet<double>& cs) {
    json j;
    const auto values = flatten(cs);
    const auto& names = coefficient_names();
    for (std::size_t i = 0; i < values.size(); ++i) j[names[i]] = values[i];
    return j;
}

inline json report_to_json(const EstimateReport& r) {
    json per = json::array();
    for (const auto& e : r.per_time)
        per.push_back({{"record_index", e.record_index}, {"t_s", e.t}, {"gt", e.gt}, {"f_red", e.f_red}, {"f_blue", e.f_blue},
                       {"ratio", e.ratio}, {"nbar_raw", e.nbar_raw}, {"bias", e.bias}, {"nbar_hat", e.nbar_hat},
                       {"variance", e.variance}, {"sigma", std::sqrt(e.variance)}, {"shots_red", e.shots_red}, {"shots_blue", e.shots_blue}});
    json disc = json::array();
    for (const auto& d : r.discarded) disc.push_back({{"record_index", d.record_index}, {"gt", d.gt}, {"reason", d.reason}});
    return {{"method", "ratio"}, {"nbar_final", r.nbar_final}, {"sigma_final", r.sigma_final}, {"cutoff_gt", r.cutoff_gt},
            {"per_time", per}, {"discarded", disc}};
}

inline EstimateReport report_from_json(const json& j) {
    EstimateReport r;
    r.nbar_final = get_field<double>(j, "nbar_final");
    r.sigma_final = get_field<double>(j, "sigma_final");
    if (j.contains("cutoff_gt")) r.cutoff_gt = get_field<double>(j, "cutoff_gt");
    return r;
}

inline std::string per_time_csv(const EstimateReport& r) {
    std::ostringstream os;
    os << "t_s,gt,f_red,f_blue,ratio,nbar_raw,bias,nbar_hat,sigma\n";
    for (const auto& e : r.per_time)
        os << fmt(e.t) << ',' << fmt(e.gt) << ',' << fmt(e.f_red) << ',' << fmt(e.f_blue) << ',' << fmt(e.ratio) << ','
           << fmt(e.nbar_raw) << ',' << fmt(e.bias) << ',' << fmt(e.nbar_hat) << ',' << fmt(std::sqrt(e.variance)) << '\n';
    return os.str();
}

inline json cutoff_to_json(const CutoffResult& c) {
    return {{"mode_label", c.mode_label}, {"nbar", c.nbar}, {"gt_star", c.gt_star}, {"gt_star_cycles", c.gt_star_cycles()},
            {"epsilon", c.epsilon}, {"reached_grid_max", c.reached_grid_max}};
}

/// Campaign config {"mode": object or path, "nbar_true", "gt_grid", "shots_per_sideband", "seed", "trials"}.
inline CampaignConfig campaign_from_json(const json& j, const std::string& base_dir = "") {
    CampaignConfig c;
    const json& m = get_field<json>(j, "mode");
    if (m.is_string()) {
        std::string p = m.get<std::string>();
        if (!base_dir.empty() && !p.empty() && p.front() != '/') p = base_dir + "/" + p;
        c.mode = read_mode(p);
    } else {
        c.mode = mode_from_json(m);
    }
    c.nbar_true = get_field<double>(j, "nbar_true");
    c.gt_grid = get_field<std::vector<double>>(j, "gt_grid");
    c.shots_per_sideband = get_field<std::int64_t>(j, "shots_per_sideband");
    c.seed = get_field<std::uint64_t>(j, "seed");
    c.trials = get_field<std::int64_t>(j, "trials");
    if (c.gt_grid.empty()) throw Error(ErrorCode::InvalidInput, "gt_grid must not be empty");
    if (c.shots_per_sideband < 1) throw Error(ErrorCode::InvalidInput, "shots_per_sideband must be >= 1");
    return c;
}

}  // namespace icct::io
