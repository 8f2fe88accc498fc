#pragma once

// Geometry search for the best working point: band crosstalk, splitting balance,
// compactness and adiabaticity folded into one weighted score (lower is better).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sapsplit/analysis.hpp"
#include "sapsplit/parallel.hpp"
#include "sapsplit/spectral.hpp"

namespace sapsplit {

struct DesignParams {
    double angle_deg = 0.03;
    double separation_um = 22.0;
    double half_length_um = 7500.0;

    [[nodiscard]] auto tie() const { return std::tie(angle_deg, separation_um, half_length_um); }
};

struct Objectives {
    double worst_crosstalk_db = INFINITY;
    double imbalance = INFINITY;  // max over the band of |pair_first - pair_second|
    double length_um = INFINITY;
    double max_adiabaticity = INFINITY;
    double coupling_ratio = NAN;  // weak/strong coupling at the input facet, lambda0
};

struct ObjectiveWeights {
    double crosstalk = 1.0;
    double imbalance = 1.0;
    double length = 1.0;
    double adiabaticity = 1.0;
};

struct ObjectiveConfig {
    ObjectiveWeights weights{};
    double lambda_min = 1500.0;
    double lambda_max = 1630.0;
    int band_points = 27;
    double crosstalk_requirement_db = -15.0;
    double crosstalk_scale_db = 10.0;  // dB per score unit
    double length_scale_cm = 1.0;      // cm per score unit
    int adiabaticity_samples = 101;
    InputMode input = InputMode::Guide;
    PropagationOptions propagation{.rel_tol = 1e-10, .abs_tol = 1e-12, .samples = 2, .max_steps = 50'000'000};

    void validate() const {
        const auto& w = weights;
        for (double v : {w.crosstalk, w.imbalance, w.length, w.adiabaticity})
            if (!(v >= 0.0)) throw std::invalid_argument("objective weights must be non-negative");
        if (!(w.crosstalk + w.imbalance + w.length + w.adiabaticity > 0.0))
            throw std::invalid_argument("at least one objective weight must be positive");
        if (!(crosstalk_scale_db > 0.0) || !(length_scale_cm > 0.0))
            throw std::invalid_argument("objective scales must be positive");
    }
};

struct DesignCandidate {
    DesignParams params;
    Objectives objectives;
    double score = INFINITY;
    bool valid = false;
    std::string error;
};

inline double score_of(const Objectives& o, const ObjectiveConfig& cfg) {
    const auto& w = cfg.weights;
    const std::pair<double, double> terms[] = {
        {w.crosstalk, (o.worst_crosstalk_db - cfg.crosstalk_requirement_db) / cfg.crosstalk_scale_db},
        {w.imbalance, o.imbalance},
        {w.length, (o.length_um / 1e4) / cfg.length_scale_cm},
        {w.adiabaticity, o.max_adiabaticity},
    };
    double s = 0.0;
    for (const auto& [weight, value] : terms)
        if (weight != 0.0) s += weight * value;  // a zero weight never turns an infinite objective into NaN
    return s;
}

/// The coupling model is held fixed across candidates (decay length, reference separation
/// and strength set once at a reference point), so geometry changes move the couplings.
inline DesignCandidate evaluate_candidate(const DesignParams& params, const Device& base, const CouplingModel& model,
                                          const ObjectiveConfig& cfg) {
    cfg.validate();
    DesignCandidate c{params, {}, INFINITY, false, {}};
    Device d = base;
    d.geometry.angle_deg = params.angle_deg;
    d.geometry.outer_separation = params.separation_um;
    d.geometry.half_length = params.half_length_um;
    try {
        const ArrayLayout layout = d.build();
        const SpectralCurve curve =
            sweep_wavelength(layout, model, cfg.lambda_min, cfg.lambda_max, cfg.band_points, cfg.input, cfg.propagation, 1);
        Objectives& o = c.objectives;
        o.worst_crosstalk_db = curve.summary.worst_crosstalk_db;
        o.imbalance = 0.0;
        for (const auto& r : curve.reports) o.imbalance = std::max(o.imbalance, std::abs(r.pair_first - r.pair_second));
        o.length_um = layout.z_end();
        o.max_adiabaticity = adiabaticity_margin(layout, model, model.lambda0, cfg.adiabaticity_samples).max_margin;
        const Hamiltonian h0 = hamiltonian_at(layout, model, 0.0, model.lambda0);
        const double k12 = h0.entries(0, 1), k23 = h0.entries(1, 2);
        o.coupling_ratio = std::min(k12, k23) / std::max(k12, k23);
        c.score = score_of(o, cfg);
        c.valid = true;
    } catch (const GeometryError& e) {
        c.error = e.what();
    }
    return c;
}

struct DesignBounds {
    double angle_min = 0.015, angle_max = 0.045;
    double separation_min = 11.0, separation_max = 33.0;
    double half_length_min = 3750.0, half_length_max = 11250.0;
};

struct GridSteps {
    int angle = 5;
    int separation = 5;
    int half_length = 5;
    long budget = 10000;
};

/// Ranking order: score, then shorter device, then lexicographic parameters.
inline bool ranks_before(const DesignCandidate& a, const DesignCandidate& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.objectives.length_um != b.objectives.length_um) return a.objectives.length_um < b.objectives.length_um;
    return a.params.tie() < b.params.tie();
}

namespace detail {

inline std::vector<double> axis(double lo, double hi, int n) {
    if (n < 1) throw std::invalid_argument("grid axis needs at least one step");
    if (n == 1) return {lo};
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1);
    return v;
}

}  // namespace detail

inline std::vector<DesignCandidate> grid_search(const DesignBounds& b, const GridSteps& steps, const Device& base,
                                                const CouplingModel& model, const ObjectiveConfig& cfg,
                                                unsigned threads = 0) {
    const long total = static_cast<long>(steps.angle) * steps.separation * steps.half_length;
    if (total > steps.budget)
        throw std::invalid_argument("grid of " + std::to_string(total) + " points exceeds budget " +
                                    std::to_string(steps.budget));
    std::vector<DesignParams> points;
    for (double a : detail::axis(b.angle_min, b.angle_max, steps.angle))
        for (double s : detail::axis(b.separation_min, b.separation_max, steps.separation))
            for (double l : detail::axis(b.half_length_min, b.half_length_max, steps.half_length))
                points.push_back({a, s, l});
    auto ranked = parallel_map(
        points.size(), [&](std::size_t i) { return evaluate_candidate(points[i], base, model, cfg); }, threads);
    std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
    return ranked;
}

/// Candidates not dominated on (crosstalk, imbalance, length, adiabaticity).
inline std::vector<DesignCandidate> pareto_front(const std::vector<DesignCandidate>& candidates) {
    auto key = [](const DesignCandidate& c) {
        const auto& o = c.objectives;
        return std::array{o.worst_crosstalk_db, o.imbalance, o.length_um, o.max_adiabaticity};
    };
    std::vector<DesignCandidate> front;
    for (const auto& c : candidates) {
        if (!c.valid) continue;
        const auto kc = key(c);
        bool dominated = false;
        for (const auto& o : candidates) {
            if (!o.valid || &o == &c) continue;
            const auto ko = key(o);
            bool all_le = true, any_lt = false;
            for (std::size_t i = 0; i < kc.size(); ++i) {
                all_le = all_le && ko[i] <= kc[i];
                any_lt = any_lt || ko[i] < kc[i];
            }
            if (all_le && any_lt) {
                dominated = true;
                break;
            }
        }
        if (!dominated) front.push_back(c);
    }
    return front;
}

struct RefineOptions {
    int max_iters = 60;
    double rel_diameter = 1e-3;
    double initial_step = 0.05;  // relative simplex edge
    std::optional<DesignBounds> bounds;  // points outside score as invalid
};

/// Nelder-Mead over (angle, separation, half-length) in coordinates relative to the start.
/// Never returns a candidate scoring worse than `start`.
inline DesignCandidate refine_local(const DesignCandidate& start, const Device& base, const CouplingModel& model,
                                    const ObjectiveConfig& cfg, const RefineOptions& ropt = {}) {
    if (ropt.max_iters <= 0 || !start.valid) return start;
    constexpr std::size_t dim = 3;
    using Point = std::array<double, dim>;
    const Point origin{start.params.angle_deg, start.params.separation_um, start.params.half_length_um};
    auto eval = [&](const Point& u) {
        const DesignParams p{origin[0] * u[0], origin[1] * u[1], origin[2] * u[2]};
        for (double v : u)
            if (!(v > 0.0)) return DesignCandidate{p, {}, INFINITY, false, "non-positive parameter"};
        if (const auto& b = ropt.bounds;
            b && (p.angle_deg < b->angle_min || p.angle_deg > b->angle_max || p.separation_um < b->separation_min ||
                  p.separation_um > b->separation_max || p.half_length_um < b->half_length_min ||
                  p.half_length_um > b->half_length_max))
            return DesignCandidate{p, {}, INFINITY, false, "outside search bounds"};
        return evaluate_candidate(p, base, model, cfg);
    };

    struct Vertex {
        Point at;
        DesignCandidate value;
    };
    std::vector<Vertex> simplex{{Point{1.0, 1.0, 1.0}, start}};
    for (std::size_t i = 0; i < dim; ++i) {
        Point u{1.0, 1.0, 1.0};
        u[i] += ropt.initial_step;
        simplex.push_back({u, eval(u)});
    }
    auto better = [](const Vertex& a, const Vertex& b) { return ranks_before(a.value, b.value); };

    for (int iter = 0; iter < ropt.max_iters; ++iter) {
        std::stable_sort(simplex.begin(), simplex.end(), better);
        double diameter = 0.0;
        for (std::size_t i = 1; i <= dim; ++i)
            for (std::size_t k = 0; k < dim; ++k)
                diameter = std::max(diameter, std::abs(simplex[i].at[k] - simplex[0].at[k]));
        if (diameter < ropt.rel_diameter) break;

        Point centroid{};
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[i].at[k] / dim;
        Vertex& worst = simplex[dim];
        auto along = [&](double t) {
            Point q;
            for (std::size_t k = 0; k < dim; ++k) q[k] = centroid[k] + t * (worst.at[k] - centroid[k]);
            return Vertex{q, eval(q)};
        };

        Vertex reflected = along(-1.0);
        if (better(reflected, simplex[0])) {
            Vertex expanded = along(-2.0);
            worst = better(expanded, reflected) ? std::move(expanded) : std::move(reflected);
            continue;
        }
        if (better(reflected, simplex[dim - 1])) {
            worst = std::move(reflected);
            continue;
        }
        const bool outside = better(reflected, worst);
        Vertex contracted = along(outside ? -0.5 : 0.5);
        if (better(contracted, outside ? reflected : worst)) {
            worst = std::move(contracted);
            continue;
        }
        for (std::size_t i = 1; i <= dim; ++i) {
            for (std::size_t k = 0; k < dim; ++k)
                simplex[i].at[k] = simplex[0].at[k] + 0.5 * (simplex[i].at[k] - simplex[0].at[k]);
            simplex[i].value = eval(simplex[i].at);
        }
    }
    const auto best = std::min_element(simplex.begin(), simplex.end(), better);
    return ranks_before(best->value, start) ? best->value : start;
}

}  // namespace sapsplit
