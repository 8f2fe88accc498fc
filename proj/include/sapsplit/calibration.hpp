#pragma once

// Closed-loop calibration of the coupling model against the input-facet coupling
// ratio (decay length) and an output crosstalk requirement (coupling strength).

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sapsplit/analysis.hpp"
#include "sapsplit/coupling.hpp"
#include "sapsplit/propagator.hpp"

namespace sapsplit {

struct StrengthSearch {
    // Bounds expressed as the accumulated coupling phase kappa_ref * z_end (rad).
    double min_phase_rad = 10.0;
    double max_phase_rad = 200.0;
    double grid_ratio = 1.02;  // consecutive grid points differ by this factor
    InputMode input = InputMode::Guide;
    PropagationOptions propagation{.rel_tol = 1e-10, .abs_tol = 1e-12, .samples = 2, .max_steps = 50'000'000};
};

struct CalibrationCurve {
    std::vector<double> kappa_ref;
    std::vector<double> crosstalk_db;
};

class StrengthCalibrationError : public CalibrationError {
public:
    StrengthCalibrationError(const std::string& what, CalibrationCurve curve)
        : CalibrationError(what), curve_(std::move(curve)) {}
    [[nodiscard]] const CalibrationCurve& curve() const { return curve_; }

private:
    CalibrationCurve curve_;
};

struct StrengthResult {
    double kappa_ref = 0.0;
    double crosstalk_db = 0.0;
    CalibrationCurve curve;  // grid points evaluated up to and including the result
};

/// Crosstalk at the output of `layout` for a given model, wavelength and input.
inline double device_crosstalk(const ArrayLayout& layout, const CouplingModel& model, double lambda_nm,
                               InputMode input, const PropagationOptions& opts) {
    const Trajectory t = propagate(layout, model, lambda_nm, make_input(input, layout, model, lambda_nm), opts);
    return split_report(t.final_state(), layout.kind()).crosstalk_db;
}

/// Smallest kappa_ref on a geometric grid whose crosstalk at lambda0 meets the target. The
/// grid is walked upward from its lower bound; crosstalk is not assumed monotone in
/// kappa_ref, so the first passing point (start of the first passing run) is returned.
inline StrengthResult calibrate_strength(const ArrayLayout& layout, const CouplingModel& base, double lambda0,
                                         double crosstalk_target_db, const StrengthSearch& search = {}) {
    if (!(search.grid_ratio > 1.0 && search.grid_ratio <= 1.02))
        throw std::invalid_argument("strength grid resolution must be in (1, 1.02]");
    if (!(search.min_phase_rad > 0.0 && search.max_phase_rad > search.min_phase_rad))
        throw std::invalid_argument("invalid strength search bounds");
    const double z_mm = layout.z_end() / kUmPerMm;
    const double k_lo = search.min_phase_rad / z_mm;
    const double k_hi = search.max_phase_rad / z_mm;
    const int n = static_cast<int>(std::ceil(std::log(k_hi / k_lo) / std::log(search.grid_ratio))) + 1;

    CalibrationCurve curve;
    CouplingModel model = base;
    for (int i = 0; i < n; ++i) {
        model.kappa_ref = k_lo * std::pow(search.grid_ratio, i);
        const double xt = device_crosstalk(layout, model, lambda0, search.input, search.propagation);
        curve.kappa_ref.push_back(model.kappa_ref);
        curve.crosstalk_db.push_back(xt);
        if (xt <= crosstalk_target_db) return {model.kappa_ref, xt, std::move(curve)};
    }
    throw StrengthCalibrationError("no kappa_ref in [" + std::to_string(k_lo) + ", " + std::to_string(k_hi) +
                                       "] /mm reaches " + std::to_string(crosstalk_target_db) + " dB",
                                   std::move(curve));
}

struct CalibrationSettings {
    double target_ratio = 0.15;
    double lambda0 = 1550.0;
    double rho = 1.0;
    double detuning = 0.0;
    double crosstalk_target_db = -25.0;
    StrengthSearch search{};
};

struct CalibratedModel {
    CouplingModel model;
    StrengthResult strength;
};

/// Decay length from the facet coupling ratio, d_ref at the near facet separation,
/// then kappa_ref from the crosstalk requirement.
inline CalibratedModel calibrate_model(const ArrayLayout& layout, const CalibrationSettings& s) {
    CouplingModel m;
    m.delta_decay = calibrate_decay(layout, s.target_ratio);
    m.d_ref = input_separations(layout).first;
    m.lambda0 = s.lambda0;
    m.rho = s.rho;
    m.detuning = s.detuning;
    m.validate();
    StrengthResult r = calibrate_strength(layout, m, s.lambda0, s.crosstalk_target_db, s.search);
    m.kappa_ref = r.kappa_ref;
    return {m, std::move(r)};
}

}  // namespace sapsplit
