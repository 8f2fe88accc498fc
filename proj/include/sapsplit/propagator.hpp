#pragma once

// Coupled-mode propagation  -i da/dz = H(z) a  with H real symmetric in 1/mm and z in µm.
//
// The core integrators are templates over any callable `z_um -> Eigen::MatrixXd`, so
// hand-built Hamiltonians (two-guide reductions, rescaled profiles) go through the
// same code path as device layouts.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "sapsplit/coupling.hpp"
#include "sapsplit/geometry.hpp"

namespace sapsplit {

using RealMatrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using cd = std::complex<double>;

inline constexpr double kUmPerMm = 1000.0;

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Hamiltonian {
    RealMatrix entries;  // 1/mm
    double z = 0.0;      // µm

    [[nodiscard]] int n() const { return static_cast<int>(entries.rows()); }
};

struct StateVector {
    ComplexVector amplitudes;
    double z = 0.0;
    double lambda = 0.0;

    [[nodiscard]] double norm_squared() const { return amplitudes.squaredNorm(); }
};

struct IntegratorStats {
    long accepted_steps = 0;
    long rejected_steps = 0;
    long evaluations = 0;
    double max_error_ratio = 0.0;  // largest accepted scaled local error estimate (<= 1)
    double min_step = INFINITY;    // µm
    double max_step = 0.0;         // µm
};

struct Trajectory {
    std::vector<StateVector> samples;
    IntegratorStats stats;

    [[nodiscard]] const StateVector& final_state() const { return samples.back(); }
    [[nodiscard]] const StateVector& initial_state() const { return samples.front(); }
};

struct PropagationOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    int samples = 512;
    long max_steps = 50'000'000;
};

inline Hamiltonian hamiltonian_at(const ArrayLayout& layout, const CouplingModel& model, double z,
                                  double lambda_nm) {
    const int n = layout.size();
    Hamiltonian h{RealMatrix::Zero(n, n), z};
    for (int i = 1; i < n; ++i) {
        const double k = model.kappa(layout.separation(i, i + 1, z), lambda_nm);
        h.entries(i - 1, i) = k;
        h.entries(i, i - 1) = k;
    }
    for (int i = 1; i <= n; ++i)
        if (layout.is_intermediate(i)) h.entries(i - 1, i - 1) = model.detuning;
    return h;
}

/// z -> H(z) callable for a device at fixed wavelength.
inline auto device_hamiltonian(const ArrayLayout& layout, const CouplingModel& model, double lambda_nm) {
    return [&layout, &model, lambda_nm](double z) -> RealMatrix {
        return hamiltonian_at(layout, model, z, lambda_nm).entries;
    };
}

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b*, the embedded error weights
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

template <class HamiltonianFn>
class DopriStepper {
public:
    DopriStepper(HamiltonianFn& h, const PropagationOptions& opts, IntegratorStats& stats)
        : h_(h), opts_(opts), stats_(stats) {}

    // Advances `a` from z_from to z_to (either direction). `step` carries the step-size
    // guess between calls and is updated in place.
    void advance(ComplexVector& a, double z_from, double z_to, double& step) {
        const double dir = z_to >= z_from ? 1.0 : -1.0;
        const double span = std::abs(z_to - z_from);
        if (span == 0.0) return;
        const double underflow = 1e-12 * std::max(span, 1.0);
        double z = z_from;
        ComplexVector k1 = rhs(z, a);
        if (!(step > 0.0)) step = initial_step(a, k1, span);
        while (dir * (z_to - z) > 0.0) {
            if (stats_.accepted_steps + stats_.rejected_steps >= opts_.max_steps)
                throw IntegrationError("step budget exhausted at z = " + std::to_string(z) + " um");
            double h = std::min(step, std::abs(z_to - z));
            const bool last = h >= std::abs(z_to - z);
            const double hs = dir * h;

            const ComplexVector k2 = rhs(z + D::c2 * hs, a + hs * (D::a21 * k1));
            const ComplexVector k3 = rhs(z + D::c3 * hs, a + hs * (D::a31 * k1 + D::a32 * k2));
            const ComplexVector k4 =
                rhs(z + D::c4 * hs, a + hs * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3));
            const ComplexVector k5 = rhs(
                z + D::c5 * hs, a + hs * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4));
            const ComplexVector k6 =
                rhs(z + hs, a + hs * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 +
                                      D::a65 * k5));
            const double z_new = last ? z_to : z + hs;
            ComplexVector a_new = a + hs * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 +
                                            D::b6 * k6);
            const ComplexVector k7 = rhs(z_new, a_new);
            const ComplexVector err = hs * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 +
                                            D::e6 * k6 + D::e7 * k7);
            const double ratio = error_ratio(err, a, a_new);

            if (!std::isfinite(ratio))
                throw IntegrationError("non-finite error estimate at z = " + std::to_string(z) + " um");
            if (ratio <= 1.0) {
                ++stats_.accepted_steps;
                stats_.max_error_ratio = std::max(stats_.max_error_ratio, ratio);
                stats_.min_step = std::min(stats_.min_step, h);
                stats_.max_step = std::max(stats_.max_step, h);
                a = std::move(a_new);
                k1 = k7;
                z = z_new;
                const double grow = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
                // A step shortened to land on z_to says nothing about the controller's choice.
                if (!last || h >= step) step = h * grow;
            } else {
                ++stats_.rejected_steps;
                step = h * std::clamp(0.9 * std::pow(ratio, -0.2), 0.1, 1.0);
                if (step < underflow)
                    throw IntegrationError("step size underflow (" + std::to_string(step) +
                                           " um) at z = " + std::to_string(z) + " um");
            }
        }
    }

private:
    using D = Dopri5;

    ComplexVector rhs(double z, const ComplexVector& a) {
        ++stats_.evaluations;
        const RealMatrix hm = h_(z);
        // da/dz = i H a, H in 1/mm, z in µm
        return cd(0.0, 1.0 / kUmPerMm) * (hm.template cast<cd>() * a);
    }

    double error_ratio(const ComplexVector& err, const ComplexVector& a0, const ComplexVector& a1) const {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < err.size(); ++i) {
            const double sc_re = opts_.abs_tol + opts_.rel_tol * std::max(std::abs(a0[i].real()), std::abs(a1[i].real()));
            const double sc_im = opts_.abs_tol + opts_.rel_tol * std::max(std::abs(a0[i].imag()), std::abs(a1[i].imag()));
            sum += std::norm(err[i].real() / sc_re) + std::norm(err[i].imag() / sc_im);
        }
        return std::sqrt(sum / (2.0 * static_cast<double>(err.size())));
    }

    double initial_step(const ComplexVector& a, const ComplexVector& k1, double span) const {
        const double scale = opts_.abs_tol + opts_.rel_tol * a.cwiseAbs().maxCoeff();
        const double d0 = a.norm() / scale;
        const double d1 = k1.norm() / scale;
        double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
        // Fifth-order method: shrink toward the tolerance-limited step.
        h = std::min(h, span);
        return std::max(h * std::pow(opts_.rel_tol, 0.2), 1e-9 * span);
    }

    HamiltonianFn& h_;
    const PropagationOptions& opts_;
    IntegratorStats& stats_;
};

inline void check_options(const PropagationOptions& opts) {
    if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0))
        throw std::invalid_argument("integration tolerances must be positive");
    if (opts.samples < 2) throw std::invalid_argument("trajectory needs at least 2 samples");
}

}  // namespace detail

/// Adaptive Dormand-Prince integration of -i da/dz = H(z) a over [0, z_end], sampled on a
/// uniform grid of opts.samples points (first at 0, last at z_end).
template <class HamiltonianFn>
Trajectory integrate(HamiltonianFn&& hamiltonian, double z_end, const StateVector& input,
                     const PropagationOptions& opts = {}) {
    detail::check_options(opts);
    if (!(z_end > 0.0)) throw std::invalid_argument("z_end must be positive");
    Trajectory traj;
    traj.samples.reserve(static_cast<std::size_t>(opts.samples));
    detail::DopriStepper stepper(hamiltonian, opts, traj.stats);
    ComplexVector a = input.amplitudes;
    traj.samples.push_back({a, 0.0, input.lambda});
    double step = 0.0;
    double z = 0.0;
    for (int k = 1; k < opts.samples; ++k) {
        const double z_next = k == opts.samples - 1 ? z_end : z_end * k / (opts.samples - 1);
        stepper.advance(a, z, z_next, step);
        z = z_next;
        traj.samples.push_back({a, z, input.lambda});
    }
    return traj;
}

/// Integrates `state` from z_from to z_to (backward when z_to < z_from).
template <class HamiltonianFn>
ComplexVector integrate_between(HamiltonianFn&& hamiltonian, const ComplexVector& state, double z_from,
                                double z_to, const PropagationOptions& opts = {},
                                IntegratorStats* stats_out = nullptr) {
    detail::check_options(opts);
    IntegratorStats stats;
    detail::DopriStepper stepper(hamiltonian, opts, stats);
    ComplexVector a = state;
    double step = 0.0;
    stepper.advance(a, z_from, z_to, step);
    if (stats_out) *stats_out = stats;
    return a;
}

/// Piecewise-constant propagator: midpoint Hamiltonian per slice, exact exponential via
/// symmetric eigendecomposition. Unitary by construction, second order in the slice width.
template <class HamiltonianFn>
ComplexVector integrate_sliced(HamiltonianFn&& hamiltonian, double z_end, const ComplexVector& input,
                               int n_slices) {
    if (n_slices < 1) throw std::invalid_argument("n_slices must be >= 1");
    const double dz = z_end / n_slices;
    ComplexVector a = input;
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver;
    for (int s = 0; s < n_slices; ++s) {
        solver.compute(hamiltonian((s + 0.5) * dz));
        const RealMatrix& v = solver.eigenvectors();
        ComplexVector c = v.transpose().cast<cd>() * a;
        for (Eigen::Index k = 0; k < c.size(); ++k)
            c[k] *= std::polar(1.0, solver.eigenvalues()[k] * dz / kUmPerMm);
        a = v.cast<cd>() * c;
    }
    return a;
}

inline void check_input(const ArrayLayout& layout, const StateVector& input) {
    if (input.amplitudes.size() != layout.size())
        throw std::invalid_argument("input state has " + std::to_string(input.amplitudes.size()) +
                                    " amplitudes, layout has " + std::to_string(layout.size()) + " guides");
}

inline Trajectory propagate(const ArrayLayout& layout, const CouplingModel& model, double lambda_nm,
                            const StateVector& input, const PropagationOptions& opts = {}) {
    check_input(layout, input);
    StateVector in = input;
    in.lambda = lambda_nm;
    return integrate(device_hamiltonian(layout, model, lambda_nm), layout.z_end(), in, opts);
}

inline StateVector propagate_oracle(const ArrayLayout& layout, const CouplingModel& model, double lambda_nm,
                                    const StateVector& input, int n_slices) {
    check_input(layout, input);
    return {integrate_sliced(device_hamiltonian(layout, model, lambda_nm), layout.z_end(), input.amplitudes,
                             n_slices),
            layout.z_end(), lambda_nm};
}

/// Runs the final state of `traj` back to z = 0 and returns its distance to the original input.
inline double backpropagate_check(const ArrayLayout& layout, const CouplingModel& model, const Trajectory& traj,
                                  const PropagationOptions& opts = {}) {
    const StateVector& last = traj.final_state();
    const ComplexVector back =
        integrate_between(device_hamiltonian(layout, model, last.lambda), last.amplitudes, last.z, 0.0, opts);
    return (back - traj.initial_state().amplitudes).norm();
}

/// Largest deviation of Σ|a_i|² from its initial value along the trajectory.
inline double norm_drift(const Trajectory& traj) {
    const double n0 = traj.initial_state().norm_squared();
    double worst = 0.0;
    for (const auto& s : traj.samples) worst = std::max(worst, std::abs(s.norm_squared() - n0));
    return worst;
}

/// Unit amplitude in the layout's nominal input guide.
inline StateVector guide_input(const ArrayLayout& layout, double lambda_nm = 0.0) {
    ComplexVector a = ComplexVector::Zero(layout.size());
    a[layout.input_guide() - 1] = 1.0;
    return {a, 0.0, lambda_nm};
}

}  // namespace sapsplit
