#pragma once

// Run configuration: INI-style sections (or the equivalent JSON object), validated against
// a fixed schema. Every key has a default; unknown keys are errors.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sapsplit/calibration.hpp"
#include "sapsplit/design.hpp"
#include "sapsplit/farfield.hpp"
#include "sapsplit/spectral.hpp"

namespace sapsplit {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct KeySpec {
    std::string_view section;
    std::string_view key;
    std::string_view default_value;
};

// Units are part of the key names and never inferred.
inline constexpr KeySpec kSchema[] = {
    {"geometry", "kind", "folded5"},
    {"geometry", "half_length_um", "7500"},
    {"geometry", "outer_separation_um", "22"},
    {"geometry", "angle_deg", "0.03"},
    {"geometry", "width_um", "6"},
    {"geometry", "cut_fraction", "1"},
    {"geometry", "separation_convention", "center"},
    {"geometry", "stretch", "1"},

    {"coupling", "target_ratio", "0.15"},
    {"coupling", "kappa_ref_per_mm", "auto"},
    {"coupling", "delta_decay_um", "auto"},
    {"coupling", "d_ref_um", "auto"},
    {"coupling", "rho", "1"},
    {"coupling", "detuning_per_mm", "0"},
    {"coupling", "lambda0_nm", "1550"},
    {"coupling", "calibration_device", "folded5"},
    {"coupling", "crosstalk_target_db", "-25"},
    {"coupling", "min_phase_rad", "10"},
    {"coupling", "max_phase_rad", "200"},
    {"coupling", "grid_ratio", "1.02"},

    {"propagation", "rel_tol", "1e-10"},
    {"propagation", "abs_tol", "1e-12"},
    {"propagation", "samples", "512"},
    {"propagation", "lambda_nm", "1540"},
    {"propagation", "input", "guide"},

    {"sweep", "lambda_min_nm", "1500"},
    {"sweep", "lambda_max_nm", "1630"},
    {"sweep", "n_points", "27"},

    {"farfield", "lambda_nm", "1560"},
    {"farfield", "theta_max_rad", "0.15"},
    {"farfield", "n_points", "1501"},
    {"farfield", "waist_um", "3"},

    {"darkstate", "lambda_nm", "1550"},
    {"darkstate", "samples", "201"},

    {"design", "angle_min_deg", "0.015"},
    {"design", "angle_max_deg", "0.045"},
    {"design", "angle_steps", "5"},
    {"design", "separation_min_um", "11"},
    {"design", "separation_max_um", "33"},
    {"design", "separation_steps", "5"},
    {"design", "half_length_min_um", "3750"},
    {"design", "half_length_max_um", "11250"},
    {"design", "half_length_steps", "5"},
    {"design", "budget", "10000"},
    {"design", "weight_crosstalk", "1"},
    {"design", "weight_imbalance", "1"},
    {"design", "weight_length", "1"},
    {"design", "weight_adiabaticity", "1"},
    {"design", "crosstalk_requirement_db", "-15"},
    {"design", "crosstalk_scale_db", "10"},
    {"design", "length_scale_cm", "1"},
    {"design", "band_points", "27"},
    {"design", "adiabaticity_samples", "101"},
    {"design", "refine_iters", "40"},
    {"design", "threads", "0"},
};

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Raw key/value store keyed by "section.key".
class Config {
public:
    Config() {
        for (const auto& k : detail::kSchema) values_[path(k.section, k.key)] = std::string(k.default_value);
    }

    static Config from_ini(std::string_view text) {
        Config c;
        std::istringstream in{std::string(text)};
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            const std::string t = detail::trim(hash == std::string::npos ? line : std::string_view(line).substr(0, hash));
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
                section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside of a section");
            c.set(section + "." + detail::trim(std::string_view(t).substr(0, eq)),
                  detail::trim(std::string_view(t).substr(eq + 1)));
        }
        return c;
    }

    static Config from_json(std::string_view text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("invalid JSON config: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("JSON config must be an object of sections");
        Config c;
        for (const auto& [section, body] : j.items()) {
            if (!body.is_object()) throw ConfigError("section '" + section + "' must be an object");
            for (const auto& [key, value] : body.items()) {
                std::string v;
                if (value.is_string()) v = value.get<std::string>();
                else if (value.is_number() || value.is_boolean()) v = value.dump();
                else throw ConfigError(section + "." + key + ": expected a scalar value");
                c.set(section + "." + key, v);
            }
        }
        return c;
    }

    static Config from_file(const std::string& filename) {
        std::ifstream in(filename);
        if (!in) throw ConfigError("cannot open config file '" + filename + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') return from_json(text);
        return from_ini(text);
    }

    /// "section.key=value"
    void apply_override(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
        set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
    }

    void set(const std::string& key_path, std::string value) {
        auto it = values_.find(key_path);
        if (it == values_.end()) throw ConfigError("unknown config key '" + key_path + "'");
        it->second = std::move(value);
    }

    [[nodiscard]] const std::string& raw(const std::string& key_path) const { return values_.at(key_path); }

    [[nodiscard]] double number(const std::string& key_path) const {
        const std::string& s = raw(key_path);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
            throw ConfigError(key_path + ": expected a number, got '" + s + "'");
        return v;
    }

    [[nodiscard]] int integer(const std::string& key_path) const {
        const std::string& s = raw(key_path);
        long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || v < INT32_MIN || v > INT32_MAX)
            throw ConfigError(key_path + ": expected an integer, got '" + s + "'");
        return static_cast<int>(v);
    }

    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string path(std::string_view s, std::string_view k) { return std::string(s) + "." + std::string(k); }

    std::map<std::string, std::string> values_;
};

struct RunConfig {
    Device device;
    double stretch = 1.0;

    CalibrationSettings calibration;
    LayoutKind calibration_device = LayoutKind::FOLDED5;
    std::optional<double> kappa_ref;  // empty = calibrate
    std::optional<double> delta_decay;
    std::optional<double> d_ref;

    PropagationOptions propagation;
    double propagate_lambda = 1540.0;
    InputMode input = InputMode::Guide;

    double sweep_min = 1500.0, sweep_max = 1630.0;
    int sweep_points = 27;

    double farfield_lambda = 1560.0;
    FarFieldOptions farfield;

    double darkstate_lambda = 1550.0;
    int darkstate_samples = 201;

    DesignBounds design_bounds;
    GridSteps design_steps;
    ObjectiveConfig objectives;
    int refine_iters = 40;
    unsigned threads = 0;

    /// Device geometry after the stretch factor (same profile over a longer device).
    [[nodiscard]] Device effective_device() const {
        Device d = device;
        d.geometry = stretched(d.geometry, stretch);
        return d;
    }
};

namespace detail {

inline void require(bool ok, const std::string& key_path, const std::string& what) {
    if (!ok) throw ConfigError(key_path + ": " + what);
}

}  // namespace detail

/// Typed, validated view of a Config. Every precondition of the downstream modules is
/// checked here so commands never start on bad input.
inline RunConfig parse_run_config(const Config& c) {
    using detail::require;
    RunConfig r;

    try {
        r.device.kind = layout_kind_from_string(c.raw("geometry.kind"));
    } catch (const GeometryError& e) {
        throw ConfigError(std::string("geometry.kind: ") + e.what());
    }
    auto& g = r.device.geometry;
    g.half_length = c.number("geometry.half_length_um");
    require(g.half_length > 0.0, "geometry.half_length_um", "must be > 0");
    g.outer_separation = c.number("geometry.outer_separation_um");
    require(g.outer_separation > 0.0, "geometry.outer_separation_um", "must be > 0");
    g.angle_deg = c.number("geometry.angle_deg");
    require(g.angle_deg >= 0.0 && g.angle_deg <= 5.0, "geometry.angle_deg", "must lie in [0, 5]");
    g.width = c.number("geometry.width_um");
    require(g.width > 0.0, "geometry.width_um", "must be > 0");
    r.device.cut_fraction = c.number("geometry.cut_fraction");
    require(r.device.cut_fraction > 0.0 && r.device.cut_fraction <= 2.0, "geometry.cut_fraction", "must lie in (0, 2]");
    const std::string& conv = c.raw("geometry.separation_convention");
    require(conv == "center" || conv == "edge", "geometry.separation_convention", "must be 'center' or 'edge'");
    g.convention = conv == "edge" ? SeparationConvention::EdgeToEdge : SeparationConvention::CenterToCenter;
    r.stretch = c.number("geometry.stretch");
    require(r.stretch > 0.0, "geometry.stretch", "must be > 0");
    try {
        (void)r.effective_device().build();
    } catch (const GeometryError& e) {
        throw ConfigError(std::string("geometry: ") + e.what());
    }

    auto& cal = r.calibration;
    cal.target_ratio = c.number("coupling.target_ratio");
    require(cal.target_ratio > 0.0 && cal.target_ratio < 1.0, "coupling.target_ratio", "must lie in (0, 1)");
    if (c.raw("coupling.kappa_ref_per_mm") != "auto") {
        r.kappa_ref = c.number("coupling.kappa_ref_per_mm");
        require(*r.kappa_ref >= 0.0, "coupling.kappa_ref_per_mm", "must be >= 0 or 'auto'");
    }
    if (c.raw("coupling.delta_decay_um") != "auto") {
        r.delta_decay = c.number("coupling.delta_decay_um");
        require(*r.delta_decay > 0.0, "coupling.delta_decay_um", "must be > 0 or 'auto'");
    }
    if (c.raw("coupling.d_ref_um") != "auto") {
        r.d_ref = c.number("coupling.d_ref_um");
        require(*r.d_ref > 0.0, "coupling.d_ref_um", "must be > 0 or 'auto'");
    }
    cal.rho = c.number("coupling.rho");
    cal.detuning = c.number("coupling.detuning_per_mm");
    cal.lambda0 = c.number("coupling.lambda0_nm");
    require(cal.lambda0 > 0.0, "coupling.lambda0_nm", "must be > 0");
    try {
        r.calibration_device = layout_kind_from_string(c.raw("coupling.calibration_device"));
    } catch (const GeometryError& e) {
        throw ConfigError(std::string("coupling.calibration_device: ") + e.what());
    }
    cal.crosstalk_target_db = c.number("coupling.crosstalk_target_db");
    require(cal.crosstalk_target_db <= 0.0, "coupling.crosstalk_target_db", "must be <= 0");
    cal.search.min_phase_rad = c.number("coupling.min_phase_rad");
    require(cal.search.min_phase_rad > 0.0, "coupling.min_phase_rad", "must be > 0");
    cal.search.max_phase_rad = c.number("coupling.max_phase_rad");
    require(cal.search.max_phase_rad > cal.search.min_phase_rad, "coupling.max_phase_rad", "must exceed min_phase_rad");
    cal.search.grid_ratio = c.number("coupling.grid_ratio");
    require(cal.search.grid_ratio > 1.0 && cal.search.grid_ratio <= 1.02, "coupling.grid_ratio", "must lie in (1, 1.02]");

    auto& p = r.propagation;
    p.rel_tol = c.number("propagation.rel_tol");
    require(p.rel_tol > 0.0, "propagation.rel_tol", "must be > 0");
    p.abs_tol = c.number("propagation.abs_tol");
    require(p.abs_tol > 0.0, "propagation.abs_tol", "must be > 0");
    p.samples = c.integer("propagation.samples");
    require(p.samples >= 2, "propagation.samples", "must be >= 2");
    cal.search.propagation.rel_tol = p.rel_tol;
    cal.search.propagation.abs_tol = p.abs_tol;
    r.propagate_lambda = c.number("propagation.lambda_nm");
    require(r.propagate_lambda > 0.0, "propagation.lambda_nm", "must be > 0");
    const std::string& input = c.raw("propagation.input");
    require(input == "guide" || input == "dark", "propagation.input", "must be 'guide' or 'dark'");
    r.input = input == "dark" ? InputMode::DarkState : InputMode::Guide;

    r.sweep_min = c.number("sweep.lambda_min_nm");
    r.sweep_max = c.number("sweep.lambda_max_nm");
    r.sweep_points = c.integer("sweep.n_points");
    require(r.sweep_min > 0.0, "sweep.lambda_min_nm", "must be > 0");
    require(r.sweep_points >= 1, "sweep.n_points", "must be >= 1");
    require(r.sweep_points == 1 || r.sweep_max > r.sweep_min, "sweep.lambda_max_nm", "must exceed lambda_min_nm");

    r.farfield_lambda = c.number("farfield.lambda_nm");
    require(r.farfield_lambda > 0.0, "farfield.lambda_nm", "must be > 0");
    r.farfield.theta_max = c.number("farfield.theta_max_rad");
    require(r.farfield.theta_max > 0.0 && r.farfield.theta_max < 1.5, "farfield.theta_max_rad", "must lie in (0, 1.5)");
    r.farfield.n_points = c.integer("farfield.n_points");
    require(r.farfield.n_points >= 3, "farfield.n_points", "must be >= 3");
    r.farfield.waist_um = c.number("farfield.waist_um");
    require(r.farfield.waist_um > 0.0, "farfield.waist_um", "must be > 0");

    r.darkstate_lambda = c.number("darkstate.lambda_nm");
    require(r.darkstate_lambda > 0.0, "darkstate.lambda_nm", "must be > 0");
    r.darkstate_samples = c.integer("darkstate.samples");
    require(r.darkstate_samples >= 2, "darkstate.samples", "must be >= 2");

    auto& b = r.design_bounds;
    b.angle_min = c.number("design.angle_min_deg");
    b.angle_max = c.number("design.angle_max_deg");
    require(b.angle_min >= 0.0 && b.angle_max >= b.angle_min, "design.angle_max_deg", "angle bounds must satisfy 0 <= min <= max");
    b.separation_min = c.number("design.separation_min_um");
    b.separation_max = c.number("design.separation_max_um");
    require(b.separation_min > 0.0 && b.separation_max >= b.separation_min, "design.separation_max_um",
            "separation bounds must satisfy 0 < min <= max");
    b.half_length_min = c.number("design.half_length_min_um");
    b.half_length_max = c.number("design.half_length_max_um");
    require(b.half_length_min > 0.0 && b.half_length_max >= b.half_length_min, "design.half_length_max_um",
            "half-length bounds must satisfy 0 < min <= max");
    auto& st = r.design_steps;
    st.angle = c.integer("design.angle_steps");
    st.separation = c.integer("design.separation_steps");
    st.half_length = c.integer("design.half_length_steps");
    for (const char* k : {"design.angle_steps", "design.separation_steps", "design.half_length_steps"})
        require(c.integer(k) >= 1, k, "must be >= 1");
    st.budget = c.integer("design.budget");
    require(static_cast<long>(st.angle) * st.separation * st.half_length <= st.budget, "design.budget",
            "grid size exceeds the evaluation budget");

    auto& o = r.objectives;
    o.weights.crosstalk = c.number("design.weight_crosstalk");
    o.weights.imbalance = c.number("design.weight_imbalance");
    o.weights.length = c.number("design.weight_length");
    o.weights.adiabaticity = c.number("design.weight_adiabaticity");
    for (const char* k : {"design.weight_crosstalk", "design.weight_imbalance", "design.weight_length", "design.weight_adiabaticity"})
        require(c.number(k) >= 0.0, k, "must be >= 0");
    require(o.weights.crosstalk + o.weights.imbalance + o.weights.length + o.weights.adiabaticity > 0.0,
            "design.weight_crosstalk", "at least one design weight must be positive");
    o.crosstalk_requirement_db = c.number("design.crosstalk_requirement_db");
    o.crosstalk_scale_db = c.number("design.crosstalk_scale_db");
    require(o.crosstalk_scale_db > 0.0, "design.crosstalk_scale_db", "must be > 0");
    o.length_scale_cm = c.number("design.length_scale_cm");
    require(o.length_scale_cm > 0.0, "design.length_scale_cm", "must be > 0");
    o.band_points = c.integer("design.band_points");
    require(o.band_points >= 1, "design.band_points", "must be >= 1");
    o.lambda_min = r.sweep_min;
    o.lambda_max = r.sweep_max;
    o.adiabaticity_samples = c.integer("design.adiabaticity_samples");
    require(o.adiabaticity_samples >= 2, "design.adiabaticity_samples", "must be >= 2");
    o.input = r.input;
    o.propagation.rel_tol = p.rel_tol;
    o.propagation.abs_tol = p.abs_tol;
    r.refine_iters = c.integer("design.refine_iters");
    require(r.refine_iters >= 0, "design.refine_iters", "must be >= 0");
    const int threads = c.integer("design.threads");
    require(threads >= 0, "design.threads", "must be >= 0");
    r.threads = static_cast<unsigned>(threads);
    return r;
}

/// Coupling model for a run: decay length from the input-facet ratio of the calibration
/// device at nominal length, then kappa_ref either as given or from the crosstalk
/// calibration (single-guide input).
inline CalibratedModel resolve_model(const RunConfig& r) {
    Device cal_device = r.device;
    cal_device.kind = r.calibration_device;
    const ArrayLayout layout = cal_device.build();
    CouplingModel m;
    m.delta_decay = r.delta_decay ? *r.delta_decay : calibrate_decay(layout, r.calibration.target_ratio);
    m.d_ref = r.d_ref ? *r.d_ref : input_separations(layout).first;
    m.lambda0 = r.calibration.lambda0;
    m.rho = r.calibration.rho;
    m.detuning = r.calibration.detuning;
    m.validate();
    if (r.kappa_ref) {
        m.kappa_ref = *r.kappa_ref;
        return {m, {}};
    }
    StrengthResult s = calibrate_strength(layout, m, r.calibration.lambda0, r.calibration.crosstalk_target_db,
                                          r.calibration.search);
    m.kappa_ref = s.kappa_ref;
    return {m, std::move(s)};
}

}  // namespace sapsplit
