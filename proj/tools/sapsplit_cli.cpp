#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sapsplit/commands.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kCalibration = 4 };

using Command = std::function<sapsplit::CommandOutput(const sapsplit::RunConfig&, const std::filesystem::path&)>;

int run(const Command& cmd, const std::string& config_path, const std::vector<std::string>& overrides,
        const std::filesystem::path& out) {
    try {
        sapsplit::Config cfg = config_path.empty() ? sapsplit::Config{} : sapsplit::Config::from_file(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        const sapsplit::RunConfig rc = sapsplit::parse_run_config(cfg);
        std::filesystem::create_directories(out);
        for (const auto& f : cmd(rc, out).files) std::cout << f.string() << '\n';
        return kOk;
    } catch (const sapsplit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const sapsplit::CalibrationError& e) {
        std::cerr << "calibration failure: " << e.what() << '\n';
        return kCalibration;
    } catch (const sapsplit::IntegrationError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const sapsplit::AnalysisError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupled-mode simulator and design tool for adiabatic-passage beam splitters"};
    app.require_subcommand(1);

    const std::map<std::string, std::pair<std::string, Command>> commands{
        {"propagate", {"Propagate one input through the device", sapsplit::cmd_propagate}},
        {"sweep", {"Output splitting versus wavelength", sapsplit::cmd_sweep}},
        {"farfield", {"Far-field pattern of the output facet", sapsplit::cmd_farfield}},
        {"optimize", {"Grid search and local refinement of the geometry", sapsplit::cmd_optimize}},
        {"darkstate", {"Supermode spectrum, dark state and adiabaticity along z", sapsplit::cmd_darkstate}},
        {"calibrate", {"Calibrate the coupling model", sapsplit::cmd_calibrate}},
    };

    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    std::string chosen;
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "INI or JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--override", overrides, "section.key=value, repeatable")->take_all();
        sub->callback([&chosen, name = name] { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    return run(commands.at(chosen).second, config_path, overrides, out_dir);
}
