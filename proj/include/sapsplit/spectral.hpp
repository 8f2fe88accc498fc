#pragma once

// Wavelength sweeps and single-parameter robustness scans.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sapsplit/analysis.hpp"
#include "sapsplit/parallel.hpp"
#include "sapsplit/propagator.hpp"

namespace sapsplit {

/// A buildable device: layout kind plus geometry.
struct Device {
    LayoutKind kind = LayoutKind::FOLDED5;
    SapGeometry geometry{};
    double cut_fraction = 1.0;  // FSAP3 only

    [[nodiscard]] ArrayLayout build() const { return build_layout(kind, geometry, cut_fraction); }
};

struct SpectralSummary {
    std::vector<double> mean_fraction;
    std::vector<double> stdev_fraction;
    double mean_pair_first = 0.0;
    double mean_pair_second = 0.0;
    double worst_crosstalk_db = 0.0;
    double mean_phase = 0.0;          // circular mean of phase_rel
    double max_phase_deviation = 0.0;  // largest |phase_rel - mean_phase|, wrapped
};

struct SpectralCurve {
    std::vector<double> wavelengths;
    std::vector<SplitReport> reports;
    SpectralSummary summary;
};

class SweepError : public IntegrationError {
public:
    SweepError(const std::string& what, double lambda) : IntegrationError(what), lambda_(lambda) {}
    [[nodiscard]] double lambda() const { return lambda_; }

private:
    double lambda_;
};

inline std::vector<double> wavelength_grid(double lambda_min, double lambda_max, int n_points) {
    if (n_points < 1) throw std::invalid_argument("wavelength grid needs at least one point");
    if (n_points == 1) return {lambda_min};
    if (!(lambda_min < lambda_max)) throw std::invalid_argument("lambda_min must be < lambda_max");
    std::vector<double> g(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i)
        g[static_cast<std::size_t>(i)] =
            i == n_points - 1 ? lambda_max : lambda_min + (lambda_max - lambda_min) * i / (n_points - 1);
    return g;
}

inline SpectralSummary summarize(const std::vector<SplitReport>& reports) {
    SpectralSummary s;
    if (reports.empty()) return s;
    const std::size_t n = reports.front().fractions.size();
    const double count = static_cast<double>(reports.size());
    s.mean_fraction.assign(n, 0.0);
    s.stdev_fraction.assign(n, 0.0);
    s.worst_crosstalk_db = -INFINITY;
    double cs = 0.0, sn = 0.0;
    for (const auto& r : reports) {
        for (std::size_t i = 0; i < n; ++i) s.mean_fraction[i] += r.fractions[i] / count;
        s.mean_pair_first += r.pair_first / count;
        s.mean_pair_second += r.pair_second / count;
        s.worst_crosstalk_db = std::max(s.worst_crosstalk_db, r.crosstalk_db);
        cs += std::cos(r.phase_rel);
        sn += std::sin(r.phase_rel);
    }
    for (const auto& r : reports)
        for (std::size_t i = 0; i < n; ++i) s.stdev_fraction[i] += std::pow(r.fractions[i] - s.mean_fraction[i], 2);
    for (auto& v : s.stdev_fraction) v = reports.size() > 1 ? std::sqrt(v / (count - 1.0)) : 0.0;
    s.mean_phase = wrap_phase(std::atan2(sn, cs));
    for (const auto& r : reports)
        s.max_phase_deviation =
            std::max(s.max_phase_deviation, std::abs(std::remainder(r.phase_rel - s.mean_phase, 2.0 * std::numbers::pi)));
    return s;
}

/// Independent propagation at every grid wavelength. Concurrency does not affect results.
inline SpectralCurve sweep_wavelength(const ArrayLayout& layout, const CouplingModel& model,
                                      const std::vector<double>& wavelengths, InputMode input,
                                      const PropagationOptions& opts = {}, unsigned threads = 0) {
    for (std::size_t i = 1; i < wavelengths.size(); ++i)
        if (!(wavelengths[i] > wavelengths[i - 1])) throw std::invalid_argument("wavelength grid must increase");
    SpectralCurve curve;
    curve.wavelengths = wavelengths;
    curve.reports = parallel_map(
        wavelengths.size(),
        [&](std::size_t i) {
            const double lam = wavelengths[i];
            try {
                const Trajectory t = propagate(layout, model, lam, make_input(input, layout, model, lam), opts);
                return split_report(t.final_state(), layout.kind());
            } catch (const std::exception& e) {
                throw SweepError("propagation failed at lambda = " + std::to_string(lam) + " nm: " + e.what(), lam);
            }
        },
        threads);
    curve.summary = summarize(curve.reports);
    return curve;
}

inline SpectralCurve sweep_wavelength(const ArrayLayout& layout, const CouplingModel& model, double lambda_min,
                                      double lambda_max, int n_points, InputMode input,
                                      const PropagationOptions& opts = {}, unsigned threads = 0) {
    return sweep_wavelength(layout, model, wavelength_grid(lambda_min, lambda_max, n_points), input, opts, threads);
}

enum class ScanParameter { KappaRef, Rho, Detuning, Alpha, Separation, CutFraction };

inline std::string_view to_string(ScanParameter p) {
    switch (p) {
        case ScanParameter::KappaRef: return "kappa_ref";
        case ScanParameter::Rho: return "rho";
        case ScanParameter::Detuning: return "detuning";
        case ScanParameter::Alpha: return "alpha";
        case ScanParameter::Separation: return "s";
        case ScanParameter::CutFraction: return "cut_fraction";
    }
    return "?";
}

inline ScanParameter scan_parameter_from_string(std::string_view name) {
    for (auto p : {ScanParameter::KappaRef, ScanParameter::Rho, ScanParameter::Detuning, ScanParameter::Alpha,
                   ScanParameter::Separation, ScanParameter::CutFraction})
        if (to_string(p) == name) return p;
    throw std::invalid_argument("unknown scan parameter '" + std::string(name) + "'");
}

struct ScanRow {
    double value = 0.0;
    std::optional<SplitReport> report;  // empty when the geometry is invalid
    std::string error;
};

/// One propagation per parameter value at lambda0, all else fixed. Geometry parameters
/// rebuild the layout; the coupling model is kept, so changing alpha or s changes the
/// coupling profile.
inline std::vector<ScanRow> robustness_scan(const Device& device, const CouplingModel& model, ScanParameter parameter,
                                            const std::vector<double>& values, double lambda0, InputMode input,
                                            const PropagationOptions& opts = {}, unsigned threads = 0) {
    return parallel_map(
        values.size(),
        [&](std::size_t i) {
            ScanRow row{values[i], std::nullopt, {}};
            Device d = device;
            CouplingModel m = model;
            switch (parameter) {
                case ScanParameter::KappaRef: m.kappa_ref = values[i]; break;
                case ScanParameter::Rho: m.rho = values[i]; break;
                case ScanParameter::Detuning: m.detuning = values[i]; break;
                case ScanParameter::Alpha: d.geometry.angle_deg = values[i]; break;
                case ScanParameter::Separation: d.geometry.outer_separation = values[i]; break;
                case ScanParameter::CutFraction: d.cut_fraction = values[i]; break;
            }
            try {
                const ArrayLayout layout = d.build();
                const Trajectory t = propagate(layout, m, lambda0, make_input(input, layout, m, lambda0), opts);
                row.report = split_report(t.final_state(), layout.kind());
            } catch (const GeometryError& e) {
                row.error = e.what();
            }
            return row;
        },
        threads);
}

}  // namespace sapsplit
