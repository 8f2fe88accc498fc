#pragma once

// Command implementations behind the sapsplit executable. Each command reads a validated
// RunConfig, writes CSV and JSON files into an output directory and returns their paths.

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sapsplit/config.hpp"

namespace sapsplit {

using ordered_json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; independent of the C locale.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary), columns_(header.size()) {
        if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
        write_fields(header);
    }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_) throw std::logic_error("CSV row width mismatch");
        std::vector<std::string> fields;
        fields.reserve(values.size());
        for (double v : values) fields.push_back(format_number(v));
        write_fields(fields);
    }

private:
    void write_fields(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
        out_ << '\n';
    }

    std::ofstream out_;
    std::size_t columns_;
};

inline void write_json(const std::filesystem::path& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

/// JSON number or null for non-finite values.
inline ordered_json json_number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

inline std::vector<std::string> indexed(const std::string& prefix, int n) {
    std::vector<std::string> v;
    for (int i = 1; i <= n; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

inline ordered_json to_json(const CouplingModel& m) {
    return {{"kappa_ref_per_mm", json_number(m.kappa_ref)}, {"d_ref_um", json_number(m.d_ref)},
            {"delta_decay_um", json_number(m.delta_decay)}, {"lambda0_nm", json_number(m.lambda0)},
            {"rho", json_number(m.rho)},                     {"detuning_per_mm", json_number(m.detuning)}};
}

inline ordered_json to_json(const SplitReport& r) {
    ordered_json fr = ordered_json::array();
    for (double f : r.fractions) fr.push_back(json_number(f));
    return {{"fractions", fr},
            {"crosstalk_db", json_number(r.crosstalk_db)},
            {"phase_rel_rad", json_number(r.phase_rel)},
            {"pair_first", json_number(r.pair_first)},
            {"pair_second", json_number(r.pair_second)},
            {"total_power", json_number(r.total_power)}};
}

inline ordered_json device_json(const RunConfig& r, const ArrayLayout& layout) {
    const auto& g = r.effective_device().geometry;
    return {{"kind", std::string(to_string(layout.kind()))},
            {"half_length_um", json_number(g.half_length)},
            {"outer_separation_um", json_number(g.outer_separation)},
            {"angle_deg", json_number(g.angle_deg)},
            {"width_um", json_number(g.width)},
            {"cut_fraction", json_number(r.device.cut_fraction)},
            {"z_end_um", json_number(layout.z_end())}};
}

struct CommandOutput {
    std::vector<std::filesystem::path> files;
};

inline CommandOutput cmd_propagate(const RunConfig& r, const std::filesystem::path& out) {
    const ArrayLayout layout = r.effective_device().build();
    const CouplingModel model = resolve_model(r).model;
    const double lam = r.propagate_lambda;
    const StateVector input = make_input(r.input, layout, model, lam);
    const Trajectory t = propagate(layout, model, lam, input, r.propagation);
    const int n = layout.size();

    CommandOutput res;
    res.files.push_back(out / "trajectory.csv");
    std::vector<std::string> header{"z_um"};
    for (const auto& h : indexed("power_", n)) header.push_back(h);
    for (const auto& h : indexed("phase_", n)) header.push_back(h);
    CsvWriter csv(res.files.back(), header);
    for (const auto& s : t.samples) {
        std::vector<double> row{s.z};
        for (int i = 0; i < n; ++i) row.push_back(std::norm(s.amplitudes[i]));
        for (int i = 0; i < n; ++i) row.push_back(std::arg(s.amplitudes[i]));
        csv.row(row);
    }

    ordered_json j;
    j["device"] = device_json(r, layout);
    j["model"] = to_json(model);
    j["lambda_nm"] = lam;
    j["input"] = r.input == InputMode::DarkState ? "dark" : "guide";
    j["samples"] = t.samples.size();
    j["final"] = to_json(split_report(t.final_state(), layout.kind()));
    j["norm_drift"] = json_number(norm_drift(t));
    j["integrator"] = {{"accepted_steps", t.stats.accepted_steps},
                       {"rejected_steps", t.stats.rejected_steps},
                       {"evaluations", t.stats.evaluations}};
    res.files.push_back(out / "propagate.json");
    write_json(res.files.back(), j);
    return res;
}

inline CommandOutput cmd_sweep(const RunConfig& r, const std::filesystem::path& out) {
    const ArrayLayout layout = r.effective_device().build();
    const CouplingModel model = resolve_model(r).model;
    const SpectralCurve curve =
        sweep_wavelength(layout, model, r.sweep_min, r.sweep_max, r.sweep_points, r.input, r.propagation, r.threads);
    const int n = layout.size();

    CommandOutput res;
    res.files.push_back(out / "sweep.csv");
    std::vector<std::string> header{"lambda_nm"};
    for (const auto& h : indexed("frac_", n)) header.push_back(h);
    header.insert(header.end(), {"crosstalk_db", "phase_rel_rad"});
    CsvWriter csv(res.files.back(), header);
    for (std::size_t k = 0; k < curve.reports.size(); ++k) {
        const auto& rep = curve.reports[k];
        std::vector<double> row{curve.wavelengths[k]};
        row.insert(row.end(), rep.fractions.begin(), rep.fractions.end());
        row.insert(row.end(), {rep.crosstalk_db, rep.phase_rel});
        csv.row(row);
    }

    const auto& s = curve.summary;
    ordered_json mean = ordered_json::array(), stdev = ordered_json::array();
    for (double v : s.mean_fraction) mean.push_back(json_number(v));
    for (double v : s.stdev_fraction) stdev.push_back(json_number(v));
    ordered_json j;
    j["device"] = device_json(r, layout);
    j["model"] = to_json(model);
    j["input"] = r.input == InputMode::DarkState ? "dark" : "guide";
    j["n_points"] = curve.reports.size();
    j["mean_fraction"] = mean;
    j["stdev_fraction"] = stdev;
    j["mean_pair_first"] = json_number(s.mean_pair_first);
    j["mean_pair_second"] = json_number(s.mean_pair_second);
    j["worst_crosstalk_db"] = json_number(s.worst_crosstalk_db);
    j["mean_phase_rad"] = json_number(s.mean_phase);
    j["max_phase_deviation_rad"] = json_number(s.max_phase_deviation);
    res.files.push_back(out / "sweep.json");
    write_json(res.files.back(), j);
    return res;
}

inline CommandOutput cmd_farfield(const RunConfig& r, const std::filesystem::path& out) {
    const ArrayLayout layout = r.effective_device().build();
    const CouplingModel model = resolve_model(r).model;
    const double lam = r.farfield_lambda;
    PropagationOptions opts = r.propagation;
    opts.samples = 2;
    const Trajectory t = propagate(layout, model, lam, make_input(r.input, layout, model, lam), opts);
    const auto emitters = output_emitters(layout, t.final_state().amplitudes);
    const FarFieldPattern p = farfield_pattern(emitters, lam, r.farfield);

    CommandOutput res;
    res.files.push_back(out / "farfield.csv");
    CsvWriter csv(res.files.back(), {"theta_rad", "intensity"});
    for (std::size_t i = 0; i < p.angles.size(); ++i) csv.row({p.angles[i], p.intensity[i]});

    ordered_json em = ordered_json::array();
    for (const auto& e : emitters)
        em.push_back({{"x_um", json_number(e.x_um)}, {"re", json_number(e.amplitude.real())},
                      {"im", json_number(e.amplitude.imag())}});
    ordered_json j;
    j["device"] = device_json(r, layout);
    j["model"] = to_json(model);
    j["lambda_nm"] = lam;
    j["emitters"] = em;
    j["central_contrast"] = json_number(p.central_contrast);
    j["fringe_spacing_rad"] = json_number(p.fringe_spacing);
    j["classification"] = std::string(to_string(classify_fringe(p)));
    res.files.push_back(out / "farfield.json");
    write_json(res.files.back(), j);
    return res;
}

inline CommandOutput cmd_darkstate(const RunConfig& r, const std::filesystem::path& out) {
    const ArrayLayout layout = r.effective_device().build();
    const CouplingModel model = resolve_model(r).model;
    const double lam = r.darkstate_lambda;
    const AdiabaticityProfile prof = adiabaticity_margin(layout, model, lam, r.darkstate_samples);
    const int n = layout.size();

    CommandOutput res;
    res.files.push_back(out / "darkstate.csv");
    std::vector<std::string> header{"z_um"};
    for (const auto& h : indexed("eig_", n)) header.push_back(h);
    for (const auto& h : indexed("dark_", n)) header.push_back(h);
    header.push_back("adiabaticity");
    CsvWriter csv(res.files.back(), header);
    for (std::size_t k = 0; k < prof.z.size(); ++k) {
        const Hamiltonian h = hamiltonian_at(layout, model, prof.z[k], lam);
        const EigenSystem es = eigensystem(h);
        const Eigen::VectorXd v = dark_state(h);
        std::vector<double> row{prof.z[k]};
        for (int i = 0; i < n; ++i) row.push_back(es.eigenvalues[i]);
        for (int i = 0; i < n; ++i) row.push_back(v[i]);
        row.push_back(prof.margin[k]);
        csv.row(row);
    }
    return res;
}

inline CommandOutput cmd_calibrate(const RunConfig& r, const std::filesystem::path& out) {
    RunConfig forced = r;
    forced.kappa_ref.reset();
    const CalibratedModel cal = resolve_model(forced);

    CommandOutput res;
    res.files.push_back(out / "calibration.csv");
    CsvWriter csv(res.files.back(), {"kappa_ref_per_mm", "crosstalk_db"});
    for (std::size_t i = 0; i < cal.strength.curve.kappa_ref.size(); ++i)
        csv.row({cal.strength.curve.kappa_ref[i], cal.strength.curve.crosstalk_db[i]});

    ordered_json j;
    j["calibration_device"] = std::string(to_string(r.calibration_device));
    j["target_ratio"] = r.calibration.target_ratio;
    j["crosstalk_target_db"] = r.calibration.crosstalk_target_db;
    j["model"] = to_json(cal.model);
    j["crosstalk_db"] = json_number(cal.strength.crosstalk_db);
    j["grid_points"] = cal.strength.curve.kappa_ref.size();
    res.files.push_back(out / "calibration.json");
    write_json(res.files.back(), j);
    return res;
}

inline ordered_json to_json(const DesignCandidate& c) {
    const auto& o = c.objectives;
    ordered_json j{{"angle_deg", json_number(c.params.angle_deg)},
                   {"separation_um", json_number(c.params.separation_um)},
                   {"half_length_um", json_number(c.params.half_length_um)},
                   {"worst_crosstalk_db", json_number(o.worst_crosstalk_db)},
                   {"imbalance", json_number(o.imbalance)},
                   {"length_um", json_number(o.length_um)},
                   {"max_adiabaticity", json_number(o.max_adiabaticity)},
                   {"coupling_ratio", json_number(o.coupling_ratio)},
                   {"score", json_number(c.score)},
                   {"valid", c.valid}};
    if (!c.error.empty()) j["error"] = c.error;
    return j;
}

inline CommandOutput cmd_optimize(const RunConfig& r, const std::filesystem::path& out) {
    const CouplingModel model = resolve_model(r).model;
    const Device base = r.device;
    const auto ranked = grid_search(r.design_bounds, r.design_steps, base, model, r.objectives, r.threads);
    const auto front = pareto_front(ranked);
    auto on_front = [&](const DesignCandidate& c) {
        for (const auto& f : front)
            if (f.params.tie() == c.params.tie()) return true;
        return false;
    };

    CommandOutput res;
    res.files.push_back(out / "candidates.csv");
    CsvWriter csv(res.files.back(), {"rank", "angle_deg", "separation_um", "half_length_um", "worst_crosstalk_db",
                                     "imbalance", "length_um", "max_adiabaticity", "coupling_ratio", "score", "valid",
                                     "pareto"});
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& c = ranked[i];
        const auto& o = c.objectives;
        csv.row({static_cast<double>(i + 1), c.params.angle_deg, c.params.separation_um, c.params.half_length_um,
                 o.worst_crosstalk_db, o.imbalance, o.length_um, o.max_adiabaticity, o.coupling_ratio, c.score,
                 c.valid ? 1.0 : 0.0, on_front(c) ? 1.0 : 0.0});
    }

    ordered_json j;
    j["model"] = to_json(model);
    j["candidates"] = ranked.size();
    j["pareto_size"] = front.size();
    if (!ranked.empty()) {
        j["grid_best"] = to_json(ranked.front());
        RefineOptions ro;
        ro.max_iters = r.refine_iters;
        ro.bounds = r.design_bounds;
        j["refined"] = to_json(refine_local(ranked.front(), base, model, r.objectives, ro));
    }
    res.files.push_back(out / "best_candidate.json");
    write_json(res.files.back(), j);
    return res;
}

}  // namespace sapsplit
