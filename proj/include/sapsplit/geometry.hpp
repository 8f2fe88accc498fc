#pragma once

// Waveguide-array layouts for 3-guide SAP, fractional SAP and 2-folded SAP
// couplers. Transverse positions are in µm, z in µm. Guide labels are 1-based.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sapsplit {

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class LayoutKind { SAP3, FSAP3, FOLDED5 };

inline std::string_view to_string(LayoutKind kind) {
    switch (kind) {
        case LayoutKind::SAP3: return "sap3";
        case LayoutKind::FSAP3: return "fsap3";
        case LayoutKind::FOLDED5: return "folded5";
    }
    return "?";
}

inline LayoutKind layout_kind_from_string(std::string_view name) {
    if (name == "sap3") return LayoutKind::SAP3;
    if (name == "fsap3") return LayoutKind::FSAP3;
    if (name == "folded5") return LayoutKind::FOLDED5;
    throw GeometryError("unknown layout kind '" + std::string(name) + "'");
}

/// How the outer separation s is measured. Edge-to-edge adds one width.
enum class SeparationConvention { CenterToCenter, EdgeToEdge };

inline double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

/// Straight centerline x(z) = x0 + slope * z.
struct WaveguidePath {
    double x0 = 0.0;
    double slope = 0.0;
    int label = 0;

    [[nodiscard]] double x(double z) const { return x0 + slope * z; }
};

inline const double kMaxSlope = std::tan(degrees_to_radians(5.0));

/// Geometric parameters shared by all builders. Angles in degrees.
struct SapGeometry {
    double half_length = 7500.0;  // L, µm; full SAP length is 2L
    double outer_separation = 22.0;
    double angle_deg = 0.03;
    double width = 6.0;
    SeparationConvention convention = SeparationConvention::CenterToCenter;

    [[nodiscard]] double center_separation() const {
        return convention == SeparationConvention::EdgeToEdge ? outer_separation + width
                                                              : outer_separation;
    }
};

class ArrayLayout {
public:
    ArrayLayout(LayoutKind kind, std::vector<WaveguidePath> paths, double z_end, double width)
        : kind_(kind), paths_(std::move(paths)), z_end_(z_end), width_(width) {
        validate();
    }

    [[nodiscard]] LayoutKind kind() const { return kind_; }
    [[nodiscard]] const std::vector<WaveguidePath>& paths() const { return paths_; }
    [[nodiscard]] int size() const { return static_cast<int>(paths_.size()); }
    [[nodiscard]] double z_end() const { return z_end_; }
    [[nodiscard]] double width() const { return width_; }

    [[nodiscard]] const WaveguidePath& path(int label) const {
        if (label < 1 || label > size())
            throw std::out_of_range("waveguide label " + std::to_string(label) + " out of range");
        return paths_[static_cast<std::size_t>(label - 1)];
    }

    /// Intermediate (inclined) guides: 2 for the 3-guide devices, 2 and 4 for FOLDED5.
    /// They carry the detuning on the Hamiltonian diagonal.
    [[nodiscard]] bool is_intermediate(int label) const {
        return kind_ == LayoutKind::FOLDED5 ? (label == 2 || label == 4) : label == 2;
    }

    /// Guide that receives the nominal input (1 for SAP3/FSAP3, 3 for FOLDED5).
    [[nodiscard]] int input_guide() const { return kind_ == LayoutKind::FOLDED5 ? 3 : 1; }

    /// Guide whose residual power defines the crosstalk.
    [[nodiscard]] int central_guide() const { return kind_ == LayoutKind::FOLDED5 ? 3 : 2; }

    /// The two output ports of the splitter.
    [[nodiscard]] std::pair<int, int> output_pair() const {
        return kind_ == LayoutKind::FOLDED5 ? std::pair{1, 5} : std::pair{1, 3};
    }

    [[nodiscard]] double x(int label, double z) const {
        check_z(z);
        return path(label).x(z);
    }

    [[nodiscard]] double separation(int i, int j, double z) const {
        check_z(z);
        return std::abs(path(j).x(z) - path(i).x(z));
    }

    /// Minimum adjacent center-to-center separation over the device, attained at an endpoint.
    [[nodiscard]] double min_adjacent_separation() const {
        double best = INFINITY;
        for (int i = 1; i < size(); ++i)
            for (double z : {0.0, z_end_})
                best = std::min(best, path(i + 1).x(z) - path(i).x(z));
        return best;
    }

private:
    void check_z(double z) const {
        // A few ulps of slack so that sample grids ending at z_end stay valid.
        const double slack = 1e-9 * std::max(1.0, z_end_);
        if (!(z >= -slack && z <= z_end_ + slack))
            throw std::out_of_range("z = " + std::to_string(z) + " outside [0, " +
                                    std::to_string(z_end_) + "]");
    }

    void validate() const {
        if (!(z_end_ > 0.0)) throw GeometryError("device length must be positive");
        if (!(width_ > 0.0)) throw GeometryError("waveguide width must be positive");
        if (paths_.size() < 2) throw GeometryError("layout needs at least two waveguides");
        for (const auto& p : paths_)
            if (std::abs(p.slope) > kMaxSlope)
                throw GeometryError("waveguide " + std::to_string(p.label) +
                                    " is inclined beyond 5 degrees");
        // Paths are straight, so ordering and clearance only need checking at the ends.
        for (std::size_t i = 0; i + 1 < paths_.size(); ++i) {
            for (double z : {0.0, z_end_}) {
                const double gap = paths_[i + 1].x(z) - paths_[i].x(z);
                if (!(gap > 0.0))
                    throw GeometryError("waveguides " + std::to_string(paths_[i].label) + " and " +
                                        std::to_string(paths_[i + 1].label) + " cross");
                if (gap < width_)
                    throw GeometryError("waveguides " + std::to_string(paths_[i].label) + " and " +
                                        std::to_string(paths_[i + 1].label) +
                                        " overlap (separation " + std::to_string(gap) +
                                        " um < width " + std::to_string(width_) + " um)");
            }
        }
    }

    LayoutKind kind_;
    std::vector<WaveguidePath> paths_;
    double z_end_;
    double width_;
};

namespace detail {

inline void check_geometry(const SapGeometry& g) {
    if (!(g.half_length > 0.0)) throw GeometryError("half_length must be positive");
    if (!(g.outer_separation > 0.0)) throw GeometryError("outer_separation must be positive");
    if (!(g.angle_deg >= 0.0)) throw GeometryError("angle must be non-negative");
    if (!(g.width > 0.0)) throw GeometryError("width must be positive");
}

// Inclined guide 2 of a 3-guide SAP: midpoint at z = L, nearer guide 3 at z = 0.
inline std::vector<WaveguidePath> sap3_paths(const SapGeometry& g) {
    const double s = g.center_separation();
    const double t = std::tan(degrees_to_radians(g.angle_deg));
    return {{0.0, 0.0, 1}, {s / 2 + g.half_length * t, -t, 2}, {s, 0.0, 3}};
}

}  // namespace detail

inline ArrayLayout build_sap3(const SapGeometry& g) {
    detail::check_geometry(g);
    return {LayoutKind::SAP3, detail::sap3_paths(g), 2.0 * g.half_length, g.width};
}

/// SAP3 truncated at z_end = cut_fraction * L. cut_fraction = 2 is the untruncated
/// device and comes back as a plain SAP3.
inline ArrayLayout build_fsap3(const SapGeometry& g, double cut_fraction) {
    detail::check_geometry(g);
    if (!(cut_fraction > 0.0 && cut_fraction <= 2.0))
        throw GeometryError("cut_fraction must lie in (0, 2]");
    if (cut_fraction == 2.0) return build_sap3(g);
    return {LayoutKind::FSAP3, detail::sap3_paths(g), cut_fraction * g.half_length, g.width};
}

/// Two mirror-image SAP3 halves sharing guide 3. Inclined guides 2 and 4 start near
/// the outer guides and finish near the center, so the dark state runs |3> -> |1>+|5>.
inline ArrayLayout build_folded5(const SapGeometry& g) {
    detail::check_geometry(g);
    const double s = g.center_separation();
    const double t = std::tan(degrees_to_radians(g.angle_deg));
    const double x2_0 = s / 2 - g.half_length * t;
    std::vector<WaveguidePath> paths{
        {0.0, 0.0, 1}, {x2_0, t, 2}, {s, 0.0, 3}, {2 * s - x2_0, -t, 4}, {2 * s, 0.0, 5}};
    return {LayoutKind::FOLDED5, std::move(paths), 2.0 * g.half_length, g.width};
}

inline ArrayLayout build_layout(LayoutKind kind, const SapGeometry& g, double cut_fraction = 1.0) {
    switch (kind) {
        case LayoutKind::SAP3: return build_sap3(g);
        case LayoutKind::FSAP3: return build_fsap3(g, cut_fraction);
        case LayoutKind::FOLDED5: return build_folded5(g);
    }
    throw GeometryError("unknown layout kind");
}

/// Same separation profile over a device `factor` times longer: half-length scaled up,
/// lateral slope scaled down.
inline SapGeometry stretched(SapGeometry g, double factor) {
    const double t = std::tan(degrees_to_radians(g.angle_deg)) / factor;
    g.half_length *= factor;
    g.angle_deg = std::atan(t) * 180.0 / std::numbers::pi;
    return g;
}

inline double separation(const ArrayLayout& layout, int i, int j, double z) {
    return layout.separation(i, j, z);
}

}  // namespace sapsplit
