#pragma once

// Fraunhofer pattern of the output facet, treated as a row of identical Gaussian
// emitters, and a bright/dark classification of its central fringe.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "sapsplit/geometry.hpp"
#include "sapsplit/propagator.hpp"

namespace sapsplit {

struct Emitter {
    std::complex<double> amplitude;
    double x_um = 0.0;
};

struct FarFieldPattern {
    std::vector<double> angles;     // rad, symmetric about 0
    std::vector<double> intensity;  // normalized to max 1 on the grid
    // I(0) relative to the fully coherent peak (sum |a_j|)^2, which is the envelope maximum
    // and makes the contrast of two equal beams exactly cos^2(dphi/2).
    double central_contrast = 0.0;
    double fringe_spacing = 0.0;  // rad, NaN when fewer than three maxima are resolved
};

enum class FringeClass { BrightCenter, DarkCenter, Intermediate };

inline std::string_view to_string(FringeClass c) {
    switch (c) {
        case FringeClass::BrightCenter: return "BRIGHT_CENTER";
        case FringeClass::DarkCenter: return "DARK_CENTER";
        case FringeClass::Intermediate: return "INTERMEDIATE";
    }
    return "?";
}

struct FarFieldOptions {
    double waist_um = 3.0;
    double theta_max = 0.15;  // rad
    int n_points = 1501;
};

namespace detail {

inline double farfield_intensity(const std::vector<Emitter>& emitters, double waist_um, double lambda_um, double theta) {
    const double k = 2.0 * std::numbers::pi / lambda_um;
    const double st = std::sin(theta);
    std::complex<double> field{};
    for (const auto& e : emitters) field += e.amplitude * std::polar(1.0, k * e.x_um * st);
    const double env = std::exp(-2.0 * std::pow(std::numbers::pi * waist_um * st / lambda_um, 2));
    return std::norm(field) * env;
}

}  // namespace detail

inline FarFieldPattern farfield_pattern(const std::vector<Emitter>& emitters, double lambda_nm,
                                        const FarFieldOptions& opts = {}) {
    if (emitters.size() < 2) throw std::invalid_argument("far field needs at least two emitters");
    if (!(opts.waist_um > 0.0)) throw std::invalid_argument("mode waist must be positive");
    if (!(opts.theta_max > 0.0) || opts.n_points < 3) throw std::invalid_argument("invalid angle grid");
    double coherent = 0.0;
    for (const auto& e : emitters) coherent += std::abs(e.amplitude);
    if (!(coherent > 0.0)) throw std::invalid_argument("far field of all-zero amplitudes");

    const double lambda_um = lambda_nm / 1000.0;
    FarFieldPattern p;
    const int n = opts.n_points;
    p.angles.resize(static_cast<std::size_t>(n));
    p.intensity.resize(static_cast<std::size_t>(n));
    double peak = 0.0;
    for (int i = 0; i < n; ++i) {
        // Mirror-exact grid: theta_i = -theta_{n-1-i}.
        const double t = opts.theta_max * (2.0 * i - (n - 1)) / (n - 1);
        p.angles[static_cast<std::size_t>(i)] = t;
        p.intensity[static_cast<std::size_t>(i)] = detail::farfield_intensity(emitters, opts.waist_um, lambda_um, t);
        peak = std::max(peak, p.intensity[static_cast<std::size_t>(i)]);
    }
    for (auto& v : p.intensity) v /= peak;
    p.central_contrast = detail::farfield_intensity(emitters, opts.waist_um, lambda_um, 0.0) / (coherent * coherent);

    std::vector<std::size_t> maxima;
    for (std::size_t i = 1; i + 1 < p.intensity.size(); ++i)
        if (p.intensity[i] > p.intensity[i - 1] && p.intensity[i] >= p.intensity[i + 1]) maxima.push_back(i);
    p.fringe_spacing = NAN;
    if (maxima.size() >= 3) {
        std::size_t best = 1;
        for (std::size_t m = 1; m + 1 < maxima.size(); ++m)
            if (std::abs(p.angles[maxima[m]]) < std::abs(p.angles[maxima[best]])) best = m;
        p.fringe_spacing = 0.5 * (p.angles[maxima[best + 1]] - p.angles[maxima[best - 1]]);
    }
    return p;
}

inline constexpr double kBrightThreshold = 0.9;
inline constexpr double kDarkThreshold = 0.1;
inline constexpr double kCentralEmitterThreshold = 1e-4;

inline FringeClass classify_fringe(const FarFieldPattern& p) {
    if (p.central_contrast >= kBrightThreshold) return FringeClass::BrightCenter;
    if (p.central_contrast <= kDarkThreshold) return FringeClass::DarkCenter;
    return FringeClass::Intermediate;
}

/// Emitters at the output facet: the two output ports, plus the central guide when it
/// carries more than 1e-4 of the power.
inline std::vector<Emitter> output_emitters(const ArrayLayout& layout, const ComplexVector& state) {
    const auto [o1, o2] = layout.output_pair();
    const double z = layout.z_end();
    std::vector<Emitter> out{{state[o1 - 1], layout.x(o1, z)}, {state[o2 - 1], layout.x(o2, z)}};
    const int c = layout.central_guide();
    const double total = state.squaredNorm();
    if (total > 0.0 && std::norm(state[c - 1]) / total > kCentralEmitterThreshold)
        out.push_back({state[c - 1], layout.x(c, z)});
    return out;
}

}  // namespace sapsplit
