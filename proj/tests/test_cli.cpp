#include <cmath>
#include <filesystem>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "icct/app.hpp"

using namespace icct;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = app::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return std::string(ICCT_DATA_DIR) + "/" + name; }

class TempDir {
public:
    TempDir() : path_(fs::temp_directory_path() / ("icct_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++))) {
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path path_;
};

}  // namespace

TEST(Io, ModeNormalizationRule) {
    const ModeSpec m = io::mode_from_json({{"eta", {0.5, 0.5, 0.5, 0.5004}}, {"g_rad_per_s", 1e5}});
    double s = 0.0;
    for (double e : m.eta) s += e * e;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_THROW(io::mode_from_json({{"eta", {0.5, 0.5, 0.5, 0.6}}, {"g_rad_per_s", 1e5}}), Error);
    EXPECT_THROW(io::mode_from_json({{"eta", {1.0}}}), Error);
    EXPECT_THROW(io::mode_from_json({{"eta", "x"}, {"g_rad_per_s", 1.0}}), Error);
    const ModeSpec f = io::mode_from_json({{"eta", {1.0}}, {"g_rad_per_s", 2.0}, {"frequency_rad_per_s", nullptr}});
    EXPECT_FALSE(f.frequency.has_value());
}

TEST(Io, MeasurementRoundTrip) {
    const ModeSpec mode = com_mode(2, 3e5);
    const std::vector<SidebandRecord> recs{{1e-6, 200, 10, 200, 60}, {2e-6, 150, 20, 150, 90}};
    const io::Measurement m = io::measurement_from_json(io::measurement_to_json(mode, recs));
    ASSERT_EQ(m.records.size(), 2u);
    EXPECT_EQ(m.records[1].excited_blue, 90);
    EXPECT_DOUBLE_EQ(m.records[0].t, 1e-6);
    EXPECT_DOUBLE_EQ(m.mode.g, 3e5);
    json bad = io::measurement_to_json(mode, recs);
    bad["records"][0]["excited_red"] = 500;
    EXPECT_THROW(io::measurement_from_json(bad), Error);
}

TEST(Io, NumberFormattingRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) EXPECT_EQ(std::strtod(io::fmt(v).c_str(), nullptr), v);
    EXPECT_EQ(io::fmt(0.1), "0.1");
}

TEST(Cli, GridParsing) {
    const auto a = app::parse_grid("0:1:0.25");
    ASSERT_EQ(a.size(), 5u);
    EXPECT_DOUBLE_EQ(a.back(), 1.0);
    EXPECT_EQ(app::parse_grid("0.1,0.5").size(), 2u);
    EXPECT_THROW(app::parse_grid("1:0:0.1"), Error);
    EXPECT_THROW(app::parse_grid("0:1"), Error);
    EXPECT_THROW(app::parse_grid("a,b"), Error);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run({}).code, app::kUsage);
    EXPECT_EQ(run({"nonsense"}).code, app::kUsage);
    EXPECT_EQ(run({"cutoff", "--mode"}).code, app::kUsage);
    EXPECT_EQ(run({"--help"}).code, app::kSuccess);
    const Result r = run({"cutoff", "--mode", "/nonexistent/mode.json", "--nbar", "0.1"});
    EXPECT_EQ(r.code, app::kDataError);
    const json err = json::parse(r.err);
    EXPECT_EQ(err["error"], "InvalidInput");
    EXPECT_FALSE(err["message"].get<std::string>().empty());
}

TEST(Cli, CoefficientsAndCutoff) {
    const Result c = run({"coeffs", "--mode", data("com4.json")});
    ASSERT_EQ(c.code, 0) << c.err;
    const json j = json::parse(c.out);
    EXPECT_NEAR(j["coefficients"]["B2"].get<double>(), 1.5, 1e-15);
    EXPECT_NEAR(j["P2"][1].get<double>(), 0.25, 1e-15);
    const Result k = run({"cutoff", "--mode", data("com4.json"), "--nbar", "0.1"});
    ASSERT_EQ(k.code, 0) << k.err;
    EXPECT_NEAR(json::parse(k.out)["gt_star_cycles"].get<double>(), 0.215, 2e-3);
    const Result rel = run({"cutoff", "--mode", data("com4.json"), "--nbar", "0.1", "--epsilon-relative"});
    EXPECT_LT(json::parse(rel.out)["gt_star"].get<double>(), json::parse(k.out)["gt_star"].get<double>());
}

TEST(Cli, SimulateCsv) {
    const Result r = run({"simulate", "--mode", data("com4.json"), "--nbar", "0.1", "--sideband", "b", "--gt-grid", "0:1:0.5"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "gt,P_global,P_mean");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3);
    EXPECT_EQ(run({"simulate", "--mode", data("com4.json"), "--nbar", "0.1", "--gt-grid", "0,-1"}).code, app::kDataError);
}

TEST(Cli, OutputsAreReproducible) {
    const std::vector<std::string> sim{"simulate", "--mode", data("com4.json"), "--nbar", "0.2", "--gt-grid", "0.5,0.8,1.1", "--shots", "200", "--seed", "5"};
    EXPECT_EQ(run(sim).out, run(sim).out);
    auto other = sim;
    other.back() = "6";
    EXPECT_NE(run(sim).out, run(other).out);
    const std::vector<std::string> crb{"crb", "--mode", data("com4.json"), "--nbar-grid", "0.1,0.4"};
    EXPECT_EQ(run(crb).out, run(crb).out);
}

TEST(Cli, ManifestInOutputDirectory) {
    TempDir dir;
    const Result r = run({"--threads", "2", "estimate", "--data", data("measurement_mode3.json"), "--out", dir.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = io::read_json(dir / "manifest.json");
    EXPECT_EQ(m["subcommand"], "estimate");
    EXPECT_EQ(m["inputs"][0], data("measurement_mode3.json"));
    EXPECT_EQ(m["output_dir"], dir.str());
    EXPECT_EQ(m["tool_version"], app::kToolVersion);
    EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
    EXPECT_TRUE(fs::exists(dir / "result.json"));
    EXPECT_TRUE(fs::exists(dir / "per_time.csv"));
    set_thread_count(0);
}

TEST(Cli, EstimateMethods) {
    const Result ratio = run({"estimate", "--data", data("measurement_mode3.json")});
    ASSERT_EQ(ratio.code, 0) << ratio.err;
    const json r = json::parse(ratio.out);
    EXPECT_EQ(r["cutoff"]["source"], "computed");
    EXPECT_GT(r["per_time"].size(), 0u);
    const Result given = run({"estimate", "--data", data("measurement_mode3.json"), "--cutoff-gt", "0.7"});
    EXPECT_EQ(json::parse(given.out)["cutoff_gt"].get<double>(), 0.7);
    const Result fit = run({"fit", "--data", data("measurement_mode3.json")});
    ASSERT_EQ(fit.code, 0) << fit.err;
    EXPECT_NEAR(json::parse(fit.out)["nbar_hat"].get<double>(), r["nbar_final"].get<double>(), 0.1);
    const Result none = run({"estimate", "--data", data("measurement_mode3.json"), "--cutoff-gt", "1e-9"});
    EXPECT_EQ(none.code, app::kDataError);
    EXPECT_EQ(json::parse(none.err)["error"], "NoUsableRecords");
    EXPECT_EQ(run({"bichromatic", "--data", data("measurement_mode3.json")}).code, app::kDataError);
}

TEST(Cli, BichromaticSubcommand) {
    const Result r = run({"bichromatic", "--data", data("bichromatic_com2.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_NEAR(j["nbar_hat"].get<double>(), 0.5, 5.0 * j["sigma"].get<double>());
}

TEST(Cli, SimulateEstimateRoundTrip) {
    TempDir dir;
    const double truth = 0.32;
    int covered = 0;
    for (int seed = 1; seed <= 100; ++seed) {
        const std::string file = dir / "m.json";
        const Result sim = run({"simulate", "--mode", data("chain4/mode3.json"), "--nbar", "0.32", "--gt-grid", "0.54,0.65,0.76,0.86,0.97,1.08",
                                "--shots", "200", "--seed", std::to_string(seed)});
        ASSERT_EQ(sim.code, 0) << sim.err;
        io::write_text(file, sim.out);
        const Result est = run({"estimate", "--data", file, "--cutoff-gt", "1.0807"});
        ASSERT_EQ(est.code, 0) << est.err;
        const json j = json::parse(est.out);
        if (std::abs(j["nbar_final"].get<double>() - truth) <= 2.0 * j["sigma_final"].get<double>()) ++covered;
    }
    EXPECT_GE(covered, 95);
}

TEST(Cli, MonteCarloAndFisher) {
    const Result mc = run({"montecarlo", "--config", data("campaign_com4.json")});
    ASSERT_EQ(mc.code, 0) << mc.err;
    const json j = json::parse(mc.out);
    EXPECT_EQ(j["rows"].size(), 3u);
    for (const auto& row : j["rows"]) EXPECT_NEAR(row["empirical_variance"].get<double>() / row["predicted_variance"].get<double>(), 1.0, 0.15);
    const Result f = run({"fisher", "--nbar", "0.001", "--gt-grid", "0.5,1.0"});
    ASSERT_EQ(f.code, 0) << f.err;
    EXPECT_NEAR(json::parse(f.out)["blue_zeros_cycles"][0].get<double>(), 0.207, 1e-3);
}

TEST(Cli, HeatingFit) {
    TempDir dir;
    const double rate = 50.0;
    std::vector<std::string> reports, delays;
    for (int k = 0; k < 4; ++k) {
        EstimateReport r;
        r.nbar_final = 0.1 + rate * 0.002 * k;
        r.sigma_final = 0.01;
        r.cutoff_gt = 1.0;
        const std::string p = dir / ("r" + std::to_string(k) + ".json");
        io::write_text(p, io::report_to_json(r).dump());
        reports.push_back(p);
        delays.push_back(io::fmt(0.002 * k));
    }
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
        return s;
    };
    const Result r = run({"heating-fit", "--reports", join(reports), "--delays", join(delays)});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out)["heating_rate_per_s"].get<double>(), rate, 1e-9);
    EXPECT_EQ(run({"heating-fit", "--reports", reports[0], "--delays", "0,1"}).code, app::kDataError);
}

TEST(Cli, ModesWritesFiles) {
    TempDir dir;
    const Result r = run({"modes", "--n", "3", "--write-dir", dir.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    const ModeSpec m1 = io::read_mode(dir / "mode1.json");
    EXPECT_TRUE(is_uniform_mode(m1, 1e-9));
    EXPECT_EQ(json::parse(r.out)["modes"].size(), 3u);
}

TEST(Cli, FiguresWithSchema) {
    TempDir dir;
    const Result r = run({"figures", "--which", "fig3", "--out", dir.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "fig3.csv"));
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    const json schema = io::read_json(dir / "schema.json");
    EXPECT_TRUE(schema.contains("fig3.csv"));
    EXPECT_EQ(run({"figures", "--which", "fig3"}).code, app::kUsage);
}

TEST(Cli, DemoNaive) {
    const Result r = run({"demo-naive", "--n", "19", "--nbar", "5", "--gt-grid", "0.1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out)["rows"][0]["global_estimate"].get<double>(), 5.0, 0.05);
}
