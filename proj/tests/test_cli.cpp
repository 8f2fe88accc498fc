#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sapsplit/commands.hpp"

using namespace sapsplit;
namespace fs = std::filesystem;

namespace {

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Csv read_csv(const fs::path& p) {
    std::ifstream in(p);
    Csv c;
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::stringstream ss(l);
        std::string f;
        while (std::getline(ss, f, ',')) out.push_back(f);
        return out;
    };
    std::getline(in, line);
    c.header = split(line);
    while (std::getline(in, line)) {
        std::vector<double> row;
        for (const auto& f : split(line)) row.push_back(std::stod(f));
        c.rows.push_back(row);
    }
    return c;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("sapsplit_cli_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

RunConfig config_for(const std::string& kind, const std::vector<std::string>& overrides = {}) {
    Config c = Config::from_file(std::string(SAPSPLIT_CONFIG_DIR) + "/" + kind + ".ini");
    for (const auto& o : overrides) c.apply_override(o);
    return parse_run_config(c);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SAPSPLIT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST(Config, DefaultsMatchNominalPoint) {
    const RunConfig r = parse_run_config(Config{});
    EXPECT_EQ(r.device.kind, LayoutKind::FOLDED5);
    EXPECT_EQ(r.device.geometry.half_length, 7500.0);
    EXPECT_EQ(r.device.geometry.outer_separation, 22.0);
    EXPECT_EQ(r.device.geometry.angle_deg, 0.03);
    EXPECT_EQ(r.calibration.target_ratio, 0.15);
    EXPECT_FALSE(r.kappa_ref);
}

TEST(Config, IniParsing) {
    const Config c = Config::from_ini("# comment\n[geometry]\nkind = sap3 ; trailing\nangle_deg=0.02\n\n[sweep]\n n_points = 5\n");
    const RunConfig r = parse_run_config(c);
    EXPECT_EQ(r.device.kind, LayoutKind::SAP3);
    EXPECT_EQ(r.device.geometry.angle_deg, 0.02);
    EXPECT_EQ(r.sweep_points, 5);
}

TEST(Config, JsonMirrorEquivalent) {
    const Config a = Config::from_file(std::string(SAPSPLIT_CONFIG_DIR) + "/folded5.ini");
    const Config b = Config::from_file(std::string(SAPSPLIT_CONFIG_DIR) + "/folded5.json");
    const RunConfig ra = parse_run_config(a), rb = parse_run_config(b);
    EXPECT_EQ(ra.device.geometry.half_length, rb.device.geometry.half_length);
    EXPECT_EQ(ra.device.geometry.angle_deg, rb.device.geometry.angle_deg);
    EXPECT_EQ(ra.propagate_lambda, rb.propagate_lambda);
    EXPECT_EQ(ra.sweep_points, rb.sweep_points);
    EXPECT_EQ(ra.calibration.crosstalk_target_db, rb.calibration.crosstalk_target_db);
}

TEST(Config, UnknownKeysRejectedWithPath) {
    try {
        (void)Config::from_ini("[geometry]\nlength = 3\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("geometry.length"), std::string::npos);
    }
    EXPECT_THROW(Config::from_ini("[optics]\nkind = sap3\n"), ConfigError);
    EXPECT_THROW(Config::from_json(R"({"geometry": {"kind": "sap3", "colour": 1}})"), ConfigError);
    EXPECT_THROW(Config::from_ini("kind = sap3\n"), ConfigError);
    EXPECT_THROW(Config::from_ini("[geometry\n"), ConfigError);
}

TEST(Config, ValidationNamesOffendingKey) {
    auto expect_key = [](const std::string& assignment, const std::string& key) {
        Config c;
        c.apply_override(assignment);
        try {
            (void)parse_run_config(c);
            FAIL() << assignment;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
        }
    };
    expect_key("geometry.half_length_um=-5", "geometry.half_length_um");
    expect_key("geometry.angle_deg=abc", "geometry.angle_deg");
    expect_key("geometry.kind=ring", "geometry.kind");
    expect_key("geometry.cut_fraction=3", "geometry.cut_fraction");
    expect_key("coupling.target_ratio=1.5", "coupling.target_ratio");
    expect_key("coupling.grid_ratio=1.5", "coupling.grid_ratio");
    expect_key("propagation.samples=1", "propagation.samples");
    expect_key("propagation.input=mixed", "propagation.input");
    expect_key("sweep.n_points=2.5", "sweep.n_points");
    expect_key("farfield.waist_um=0", "farfield.waist_um");
    expect_key("design.weight_length=-1", "design.weight_length");
    expect_key("design.budget=10", "design.budget");
    expect_key("geometry.angle_deg=0.2", "geometry");
}

TEST(Config, OverrideSyntax) {
    Config c;
    c.apply_override(" geometry.kind = sap3 ");
    EXPECT_EQ(c.raw("geometry.kind"), "sap3");
    EXPECT_THROW(c.apply_override("geometry.kind"), ConfigError);
    EXPECT_THROW(c.apply_override("nosuch.key=1"), ConfigError);
}

TEST(Config, ExplicitModelSkipsCalibration) {
    const RunConfig r = config_for("folded5", {"coupling.kappa_ref_per_mm=0.9", "coupling.delta_decay_um=5",
                                               "coupling.d_ref_um=7"});
    const CalibratedModel m = resolve_model(r);
    EXPECT_EQ(m.model.kappa_ref, 0.9);
    EXPECT_EQ(m.model.delta_decay, 5.0);
    EXPECT_EQ(m.model.d_ref, 7.0);
    EXPECT_TRUE(m.strength.curve.kappa_ref.empty());
}

TEST(FormatNumber, ShortestRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(1e-300), "1e-300");
    EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(CmdPropagate, NominalSplitAt1540) {
    const fs::path out = scratch_dir("propagate");
    cmd_propagate(config_for("folded5"), out);
    const Csv c = read_csv(out / "trajectory.csv");
    ASSERT_EQ(c.header.size(), 11u);
    EXPECT_EQ(c.header[0], "z_um");
    EXPECT_EQ(c.header[1], "power_1");
    EXPECT_EQ(c.header[6], "phase_1");
    ASSERT_EQ(c.rows.size(), 512u);
    const auto& last = c.rows.back();
    EXPECT_EQ(last[0], 15000.0);
    EXPECT_NEAR(last[1], last[5], 1e-9);
    EXPECT_GT(last[1], 0.45);
    EXPECT_LT(last[2], 0.05);
    EXPECT_LT(last[3], 0.01);
    const auto j = read_json(out / "propagate.json");
    EXPECT_NEAR(j["final"]["pair_first"].get<double>(), 0.5, 1e-9);
    EXPECT_LE(j["norm_drift"].get<double>(), 1e-9);
}

TEST(CmdPropagate, ZeroCouplingAndSampleCount) {
    const fs::path out = scratch_dir("propagate_zero");
    cmd_propagate(config_for("folded5", {"coupling.kappa_ref_per_mm=0", "propagation.samples=17"}), out);
    const Csv c = read_csv(out / "trajectory.csv");
    ASSERT_EQ(c.rows.size(), 17u);
    for (std::size_t k = 1; k < c.header.size(); ++k) EXPECT_EQ(c.rows.back()[k], c.rows.front()[k]);
}

TEST(CmdSweep, NominalBandSummary) {
    const fs::path out = scratch_dir("sweep");
    cmd_sweep(config_for("folded5"), out);
    const Csv c = read_csv(out / "sweep.csv");
    ASSERT_EQ(c.rows.size(), 27u);
    EXPECT_EQ(c.header.back(), "phase_rel_rad");
    EXPECT_EQ(c.header[c.header.size() - 2], "crosstalk_db");
    const auto j = read_json(out / "sweep.json");
    EXPECT_NEAR(j["mean_pair_first"].get<double>(), 0.5, 0.03);
    EXPECT_NEAR(j["mean_pair_second"].get<double>(), 0.5, 0.03);
    EXPECT_LE(j["worst_crosstalk_db"].get<double>(), -15.0);
    for (int i = 0; i < 5; ++i) {
        double sum = 0.0;
        for (const auto& r : c.rows) sum += r[static_cast<std::size_t>(i + 1)];
        EXPECT_NEAR(j["mean_fraction"][static_cast<std::size_t>(i)].get<double>(), sum / 27.0, 1e-12);
    }
}

TEST(CmdSweep, SinglePoint) {
    const fs::path out = scratch_dir("sweep_one");
    cmd_sweep(config_for("sap3", {"sweep.n_points=1"}), out);
    EXPECT_EQ(read_csv(out / "sweep.csv").rows.size(), 1u);
}

TEST(CmdFarfield, ClassificationAndNormalization) {
    const fs::path a = scratch_dir("ff_folded");
    cmd_farfield(config_for("folded5"), a);
    EXPECT_EQ(read_json(a / "farfield.json")["classification"], "BRIGHT_CENTER");
    const Csv c = read_csv(a / "farfield.csv");
    double mx = 0.0;
    for (const auto& r : c.rows) mx = std::max(mx, r[1]);
    EXPECT_EQ(mx, 1.0);
    const fs::path b = scratch_dir("ff_fsap");
    cmd_farfield(config_for("fsap3"), b);
    EXPECT_EQ(read_json(b / "farfield.json")["classification"], "DARK_CENTER");
}

TEST(CmdOptimize, SinglePointGrid) {
    const fs::path out = scratch_dir("optimize_one");
    cmd_optimize(config_for("folded5", {"design.angle_steps=1", "design.separation_steps=1",
                                        "design.half_length_steps=1", "design.refine_iters=0"}),
                 out);
    const Csv c = read_csv(out / "candidates.csv");
    ASSERT_EQ(c.rows.size(), 1u);
    EXPECT_EQ(c.header[0], "rank");
    EXPECT_EQ(c.rows[0][0], 1.0);
}

TEST(CmdOptimize, DefaultSearchMeetsCrosstalkBound) {
    const fs::path out = scratch_dir("optimize");
    cmd_optimize(config_for("folded5"), out);
    const auto j = read_json(out / "best_candidate.json");
    EXPECT_LE(j["grid_best"]["worst_crosstalk_db"].get<double>(), -15.0);
    EXPECT_LE(j["refined"]["score"].get<double>(), j["grid_best"]["score"].get<double>());
    EXPECT_EQ(read_csv(out / "candidates.csv").rows.size(), 125u);
}

TEST(CmdDarkstate, MidpointAndEndpointRows) {
    const fs::path out = scratch_dir("darkstate");
    cmd_darkstate(config_for("folded5"), out);
    const Csv c = read_csv(out / "darkstate.csv");
    ASSERT_EQ(c.rows.size(), 201u);
    ASSERT_EQ(c.header.size(), 12u);
    const auto& mid = c.rows[100];
    EXPECT_EQ(mid[0], 7500.0);
    const double r3 = 1.0 / std::sqrt(3.0);
    const double expect[5] = {-r3, 0.0, r3, 0.0, -r3};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(mid[static_cast<std::size_t>(6 + i)], expect[i], 1e-9);
    // Eigenvalues ascending.
    for (int i = 1; i < 5; ++i) EXPECT_LE(mid[static_cast<std::size_t>(i)], mid[static_cast<std::size_t>(i + 1)]);
    // Endpoints: the 0.15 facet ratio leaves a residual of about 0.147 on the outer guides.
    const auto& first = c.rows.front();
    const auto& last = c.rows.back();
    EXPECT_NEAR(first[8], 0.978232, 1e-6);
    EXPECT_NEAR(first[6], -0.146735, 1e-6);
    EXPECT_NEAR(last[6], -0.703163, 1e-6);
    EXPECT_NEAR(last[8], 0.105474, 1e-6);
    EXPECT_NEAR(last[10], last[6], 1e-12);
}

TEST(CmdDarkstate, ZeroAngleHasZeroAdiabaticity) {
    const fs::path out = scratch_dir("darkstate_flat");
    cmd_darkstate(config_for("folded5", {"geometry.angle_deg=0", "coupling.kappa_ref_per_mm=1",
                                         "coupling.delta_decay_um=4.14", "coupling.d_ref_um=11"}),
                  out);
    for (const auto& r : read_csv(out / "darkstate.csv").rows) EXPECT_EQ(r.back(), 0.0);
}

TEST(CmdCalibrate, WritesFixture) {
    const fs::path out = scratch_dir("calibrate");
    cmd_calibrate(config_for("folded5"), out);
    const auto j = read_json(out / "calibration.json");
    EXPECT_NEAR(j["model"]["kappa_ref_per_mm"].get<double>(), 1.115612, 1e-6);
    EXPECT_EQ(read_csv(out / "calibration.csv").rows.size(), j["grid_points"].get<std::size_t>());
}

TEST(Executable, ExitCodes) {
    const std::string cfg = std::string(SAPSPLIT_CONFIG_DIR) + "/folded5.ini";
    const fs::path out = scratch_dir("exit");
    const std::string base = " --config " + cfg + " --out " + out.string();
    EXPECT_EQ(run_cli("darkstate" + base), 0);
    EXPECT_EQ(run_cli("darkstate" + base + " --override geometry.bogus=1"), 2);
    EXPECT_EQ(run_cli("darkstate" + base + " --override geometry.width_um=-1"), 2);
    EXPECT_EQ(run_cli("frobnicate" + base), 2);
    EXPECT_EQ(run_cli("propagate" + base + " --override coupling.rho=100 --override propagation.lambda_nm=1500"), 3);
    EXPECT_EQ(run_cli("calibrate" + base + " --override coupling.crosstalk_target_db=-200 --override coupling.max_phase_rad=12"),
              4);
}
