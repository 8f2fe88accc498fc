#pragma once

// Evanescent coupling model. Separations in µm, wavelengths in nm, rates in 1/mm.

#include <cmath>
#include <stdexcept>
#include <utility>

#include "sapsplit/geometry.hpp"

namespace sapsplit {

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CouplingModel {
    double kappa_ref = 0.0;     // κ at d_ref and any λ, 1/mm
    double d_ref = 0.0;         // µm
    double delta_decay = 1.0;   // δ0, 1/e decay length at lambda0, µm
    double lambda0 = 1550.0;    // nm
    double rho = 1.0;           // relative change of δ per relative change of λ
    double detuning = 0.0;      // Δ on the intermediate guides, 1/mm

    void validate() const {
        if (!(kappa_ref >= 0.0)) throw std::invalid_argument("kappa_ref must be >= 0");
        if (!(delta_decay > 0.0)) throw std::invalid_argument("delta_decay must be > 0");
        if (!(lambda0 > 0.0)) throw std::invalid_argument("lambda0 must be > 0");
        if (!std::isfinite(detuning)) throw std::invalid_argument("detuning must be finite");
    }

    /// δ(λ) = δ0 (1 + rho (λ - λ0)/λ0)
    [[nodiscard]] double decay_length(double lambda_nm) const {
        const double d = delta_decay * (1.0 + rho * (lambda_nm - lambda0) / lambda0);
        if (!(d > 0.0)) throw std::domain_error("decay length non-positive at this wavelength");
        return d;
    }

    /// κ(d, λ) = kappa_ref exp(-(d - d_ref)/δ(λ)), symmetric in the guide pair by construction.
    [[nodiscard]] double kappa(double separation_um, double lambda_nm) const {
        return kappa_ref * std::exp(-(separation_um - d_ref) / decay_length(lambda_nm));
    }
};

inline double kappa(const CouplingModel& model, double separation_um, double lambda_nm) {
    return model.kappa(separation_um, lambda_nm);
}

/// (near, far) separations of guide 2 from its two neighbours at the input facet.
inline std::pair<double, double> input_separations(const ArrayLayout& layout) {
    const double a = layout.separation(1, 2, 0.0);
    const double b = layout.separation(2, 3, 0.0);
    return {std::min(a, b), std::max(a, b)};
}

/// Decay length δ0 that makes the weak/strong coupling ratio at z = 0 equal target_ratio.
inline double calibrate_decay(const ArrayLayout& layout, double target_ratio) {
    if (!(target_ratio > 0.0 && target_ratio < 1.0))
        throw CalibrationError("target coupling ratio must lie in (0, 1)");
    const auto [near, far] = input_separations(layout);
    if (!(far - near > 0.0))
        throw CalibrationError("degenerate geometry: equal separations at z = 0, no decay length fits");
    return (far - near) / std::log(1.0 / target_ratio);
}

}  // namespace sapsplit
