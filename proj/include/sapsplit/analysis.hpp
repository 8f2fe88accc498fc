#pragma once

// Supermode analysis of the coupled-mode Hamiltonian and figures of merit of the
// output facet: dark state, adiabaticity, splitting ratios, crosstalk, phase.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sapsplit/propagator.hpp"

namespace sapsplit {

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EigenSystem {
    Eigen::VectorXd eigenvalues;  // ascending, 1/mm
    RealMatrix eigenvectors;      // columns, orthonormal
    double z = 0.0;
};

inline EigenSystem eigensystem(const Hamiltonian& h) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h.entries);
    if (solver.info() != Eigen::Success) throw AnalysisError("eigendecomposition failed");
    return {solver.eigenvalues(), solver.eigenvectors(), h.z};
}

namespace detail {

inline LayoutKind structure_of(const Hamiltonian& h) {
    if (h.n() == 3) return LayoutKind::SAP3;
    if (h.n() == 5) return LayoutKind::FOLDED5;
    throw AnalysisError("dark state defined only for 3- and 5-guide Hamiltonians");
}

inline int dark_sign_guide(const Hamiltonian& h) { return structure_of(h) == LayoutKind::FOLDED5 ? 3 : 1; }

// Null vector from the tridiagonal structure; used when the zero eigenvalue is degenerate.
inline Eigen::VectorXd structural_null_vector(const Hamiltonian& h) {
    const auto& m = h.entries;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(h.n());
    if (h.n() == 3) {
        v << m(1, 2), 0.0, -m(0, 1);
    } else {
        v << -m(2, 3), 0.0, m(0, 1), 0.0, -m(2, 3);
    }
    return v.normalized();
}

inline void fix_sign(Eigen::VectorXd& v, int guide) {
    double pivot = v[guide - 1];
    if (std::abs(pivot) < 1e-14) {
        Eigen::Index idx;
        v.cwiseAbs().maxCoeff(&idx);
        pivot = v[idx];
    }
    if (pivot < 0.0) v = -v;
}

inline Eigen::Index dark_index(const EigenSystem& es) {
    Eigen::Index idx;
    es.eigenvalues.cwiseAbs().minCoeff(&idx);
    return idx;
}

}  // namespace detail

/// Normalized zero-eigenvalue supermode, sign-fixed so the input-guide component is >= 0
/// (guide 1 for 3-guide devices, guide 3 for FOLDED5).
inline Eigen::VectorXd dark_state(const Hamiltonian& h) {
    const auto kind = detail::structure_of(h);
    const bool any_coupling = (h.entries - Eigen::MatrixXd(h.entries.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 0.0;
    if (!any_coupling) throw AnalysisError("dark state undefined: all couplings vanish");

    const EigenSystem es = eigensystem(h);
    const Eigen::Index idx = detail::dark_index(es);
    const double scale = std::max(1.0, h.entries.cwiseAbs().maxCoeff());
    int near_zero = 0;
    for (Eigen::Index k = 0; k < es.eigenvalues.size(); ++k)
        if (std::abs(es.eigenvalues[k]) <= 1e-12 * scale) ++near_zero;

    Eigen::VectorXd v = near_zero > 1 ? detail::structural_null_vector(h) : Eigen::VectorXd(es.eigenvectors.col(idx));
    // The intermediate components vanish identically for the dark state.
    v[1] = 0.0;
    if (kind == LayoutKind::FOLDED5) v[3] = 0.0;
    v.normalize();
    detail::fix_sign(v, detail::dark_sign_guide(h));
    return v;
}

/// The z = 0 dark supermode of a device, as a propagation input.
inline StateVector dark_state_input(const ArrayLayout& layout, const CouplingModel& model, double lambda_nm) {
    const Eigen::VectorXd v = dark_state(hamiltonian_at(layout, model, 0.0, lambda_nm));
    return {v.cast<cd>(), 0.0, lambda_nm};
}

enum class InputMode { Guide, DarkState };

inline StateVector make_input(InputMode mode, const ArrayLayout& layout, const CouplingModel& model,
                              double lambda_nm) {
    return mode == InputMode::DarkState ? dark_state_input(layout, model, lambda_nm) : guide_input(layout, lambda_nm);
}

struct AdiabaticityProfile {
    std::vector<double> z;       // µm
    std::vector<double> margin;  // dimensionless
    std::vector<bool> degenerate;
    double max_margin = 0.0;
};

/// A(z) = max_k |<v_k | d psi_dark/dz>| / |lambda_k - lambda_dark| on n_samples points,
/// with the derivative (per mm) from centered differences of the sign-continuous dark state.
inline AdiabaticityProfile adiabaticity_margin(const ArrayLayout& layout, const CouplingModel& model,
                                               double lambda_nm, int n_samples) {
    if (n_samples < 2) throw std::invalid_argument("adiabaticity profile needs n_samples >= 2");
    const double z_end = layout.z_end();
    const double fd = 1e-4 * z_end;
    auto dark_at = [&](double z) { return dark_state(hamiltonian_at(layout, model, z, lambda_nm)); };

    AdiabaticityProfile out;
    for (int s = 0; s < n_samples; ++s) {
        const double z = s == n_samples - 1 ? z_end : z_end * s / (n_samples - 1);
        const double lo = std::max(0.0, z - fd);
        const double hi = std::min(z_end, z + fd);
        const Eigen::VectorXd mid = dark_at(z);
        Eigen::VectorXd a = dark_at(lo);
        Eigen::VectorXd b = dark_at(hi);
        if (a.dot(mid) < 0.0) a = -a;
        if (b.dot(mid) < 0.0) b = -b;
        const Eigen::VectorXd deriv = (b - a) / ((hi - lo) / kUmPerMm);

        const EigenSystem es = eigensystem(hamiltonian_at(layout, model, z, lambda_nm));
        const Eigen::Index dark_idx = detail::dark_index(es);
        double worst = 0.0;
        bool degenerate = false;
        for (Eigen::Index k = 0; k < es.eigenvalues.size(); ++k) {
            if (k == dark_idx) continue;
            const double coupling = std::abs(es.eigenvectors.col(k).dot(deriv));
            const double gap = std::abs(es.eigenvalues[k] - es.eigenvalues[dark_idx]);
            if (gap < 1e-12) {
                degenerate = true;
                continue;
            }
            worst = std::max(worst, coupling / gap);
        }
        out.z.push_back(z);
        out.margin.push_back(worst);
        out.degenerate.push_back(degenerate);
        out.max_margin = std::max(out.max_margin, worst);
    }
    return out;
}

inline constexpr double kCrosstalkFloorDb = -120.0;

struct SplitReport {
    std::vector<double> fractions;  // P_i / sum P
    double crosstalk_db = 0.0;      // 10 log10(P_central / sum P), floored at -120 dB
    double phase_rel = 0.0;         // arg(a_out1 conj(a_out2)) in (-pi, pi]
    double pair_first = 0.0;        // P_out1 / (P_out1 + P_out2)
    double pair_second = 0.0;
    double total_power = 0.0;
};

inline double wrap_phase(double phi) {
    // atan2 already lands in [-pi, pi]; fold -pi onto pi.
    return phi <= -std::numbers::pi ? phi + 2.0 * std::numbers::pi : phi;
}

inline SplitReport split_report(const ComplexVector& state, LayoutKind kind) {
    const int n = static_cast<int>(state.size());
    const int expected = kind == LayoutKind::FOLDED5 ? 5 : 3;
    if (n != expected) throw std::invalid_argument("state size does not match layout kind");
    SplitReport r;
    r.total_power = state.squaredNorm();
    if (!(r.total_power > 0.0)) throw AnalysisError("split report of a zero state");
    r.fractions.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r.fractions[static_cast<std::size_t>(i)] = std::norm(state[i]) / r.total_power;

    const int central = kind == LayoutKind::FOLDED5 ? 3 : 2;
    const double pc = r.fractions[static_cast<std::size_t>(central - 1)];
    r.crosstalk_db = pc > 0.0 ? std::max(kCrosstalkFloorDb, 10.0 * std::log10(pc)) : kCrosstalkFloorDb;

    const int o1 = 1;
    const int o2 = kind == LayoutKind::FOLDED5 ? 5 : 3;
    const cd a1 = state[o1 - 1];
    const cd a2 = state[o2 - 1];
    r.phase_rel = wrap_phase(std::arg(a1 * std::conj(a2)));
    const double p1 = std::norm(a1);
    const double p2 = std::norm(a2);
    if (p1 + p2 > 0.0) {
        r.pair_first = p1 / (p1 + p2);
        r.pair_second = p2 / (p1 + p2);
    }
    return r;
}

inline SplitReport split_report(const StateVector& state, LayoutKind kind) { return split_report(state.amplitudes, kind); }

/// Loss bookkeeping for a measured output: divides the total output power by the
/// propagation, input-coupling and output-facet transmissions, then returns the fraction of
/// the launched power that reached the intended output ports.
struct LossBudget {
    double length_cm = 1.5;
    double loss_db_per_cm = 0.4;
    double coupling_eff = 0.5;
    double facet_transmission = 0.84;

    [[nodiscard]] double transmission() const {
        return std::pow(10.0, -loss_db_per_cm * length_cm / 10.0) * coupling_eff * facet_transmission;
    }
};

inline double loss_corrected_transfer(const std::vector<double>& raw_output_powers, const std::vector<int>& output_ports,
                                      const LossBudget& budget) {
    if (!(budget.coupling_eff > 0.0 && budget.coupling_eff <= 1.0) ||
        !(budget.facet_transmission > 0.0 && budget.facet_transmission <= 1.0))
        throw std::invalid_argument("efficiencies must lie in (0, 1]");
    if (!(budget.loss_db_per_cm >= 0.0) || !(budget.length_cm >= 0.0))
        throw std::invalid_argument("loss and length must be non-negative");
    double ports = 0.0;
    for (int p : output_ports) {
        if (p < 1 || p > static_cast<int>(raw_output_powers.size())) throw std::out_of_range("output port label");
        ports += raw_output_powers[static_cast<std::size_t>(p - 1)];
    }
    return ports / budget.transmission();
}

}  // namespace sapsplit
