#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "declab/geometry.hpp"

namespace declab {

enum class CapKind { hypersurface_box, curve_arc };

/// One tile of a partition. For boxes the base region is
/// prod_i [lower_i, lower_i + side); for arcs it is [lower_0, lower_0 + side).
/// The tile touching the right end of the domain also owns that end point.
struct Cap {
    CapKind kind = CapKind::hypersurface_box;
    std::size_t index = 0;
    Vector lower;
    double side = 0;
    double scale = 0;

    Vector center() const;
    /// Half-open membership test on base (or parameter) coordinates.
    bool contains(const Vector& base) const;
};

class CapPartition {
public:
    CapPartition(CapKind kind, double delta, double side, std::size_t base_dim,
                 std::optional<Signature> surface, std::optional<ModelCurve> curve);

    CapKind kind() const noexcept { return kind_; }
    double delta() const noexcept { return delta_; }
    double side() const noexcept { return side_; }
    /// Tiles per base axis.
    std::size_t per_axis() const noexcept { return per_axis_; }
    std::size_t base_dim() const noexcept { return base_dim_; }
    std::size_t size() const noexcept { return caps_.size(); }
    const std::vector<Cap>& caps() const noexcept { return caps_; }
    const Cap& operator[](std::size_t i) const { return caps_[i]; }
    const std::optional<Signature>& surface() const noexcept { return surface_; }
    const std::optional<ModelCurve>& curve() const noexcept { return curve_; }

    /// Index of the tile whose half-open region holds the base point.
    std::size_t locate(const Vector& base) const;

private:
    CapKind kind_;
    double delta_;
    double side_;
    std::size_t base_dim_;
    std::size_t per_axis_;
    std::optional<Signature> surface_;
    std::optional<ModelCurve> curve_;
    std::vector<Cap> caps_;
};

/// Exact integer k with delta == 2^-k; throws ContractError otherwise.
int dyadic_exponent(double delta);

/// Boxes of side 2^-ceil(k/2) for delta = 2^-k. For even k this is delta^{1/2}.
CapPartition partition_hypersurface(const Signature& s, double delta);

/// The 2^k dyadic arcs of [0, 1] for delta^{1/n} = 2^-k.
CapPartition partition_curve(std::size_t n, double delta);
CapPartition partition_curve(const ModelCurve& c, double delta);

/// Tile holding the atom; RejectionError carries the measured distance when
/// the atom is outside the delta-neighbourhood.
const Cap& assign_atom(const CapPartition& caps, const Vector& xi);

/// Parameter of the point on the curve (over [0, 1]) nearest to x, and its distance.
struct CurveProjection {
    double t;
    double distance;
};
CurveProjection project_to_curve(const ModelCurve& c, const Vector& x, double resolution = 0);

/// Map sending Phi(a + s sigma) to Phi(s) for the moment curve, sigma = delta^{1/(n+1)}.
AffineMap curve_rescale(double a, double delta, std::size_t n);

/// Map sending the graph over the sigma-box centred at c onto the graph over the unit box.
AffineMap parabolic_rescale(const Signature& s, const Vector& center, double sigma);

}  // namespace declab
