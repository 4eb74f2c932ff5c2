#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace declab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Coefficients of the quadratic form defining the truncated paraboloid
/// H = {(x, sum_i s_i x_i^2) : |x_i| <= 1/2} in R^n, n = entries + 1.
class Signature {
public:
    explicit Signature(std::vector<double> entries);

    const std::vector<double>& entries() const noexcept { return entries_; }
    double operator[](std::size_t i) const { return entries_[i]; }
    /// Ambient dimension.
    std::size_t n() const noexcept { return entries_.size() + 1; }
    std::size_t base_dim() const noexcept { return entries_.size(); }
    std::size_t positives() const noexcept;
    std::size_t negatives() const noexcept;
    bool elliptic() const noexcept { return positives() == 0 || negatives() == 0; }

    /// Quadratic form sum_i s_i x_i^2 evaluated at a base point.
    double form(const Vector& base) const;

private:
    std::vector<double> entries_;
};

/// min(#positive entries, #negative entries).
std::size_t signature_d(const Signature& s);

/// (base, sum s_i base_i^2); base must lie in [-1/2, 1/2]^{n-1}.
Vector paraboloid_lift(const Signature& s, const Vector& base);

/// Upward unit normal of the lifted graph at the given base point.
Vector unit_normal(const Signature& s, const Vector& base);

/// |det| of the matrix whose rows are the n given unit normals.
double transversality_volume(const std::vector<Vector>& normals);

/// Affine hyperplane {y : normal . y = offset} in base coordinates.
struct Hyperplane {
    Hyperplane(Vector unit_normal, double offset);
    /// Normalizes an arbitrary nonzero normal (and rescales the offset).
    static Hyperplane through(const Vector& normal, double offset);

    Vector normal;
    double offset;
};

/// Principal curvatures of the section {x in H : base(x) in E}, taken as a
/// hypersurface of the vertical hyperplane over E, at the given base point.
/// Computed from the closed-form second fundamental form of the section
/// (itself a quadric graph over E). Sorted by increasing magnitude.
std::vector<double> section_curvatures(const Signature& s, const Hyperplane& plane,
                                       const Vector& base_point);

/// Curvature magnitude below which at most one principal curvature of any
/// hyperplane section can fall (half the smallest singular value of the
/// Hessian, discounted by the worst graph slope on the unit box).
double small_curvature_threshold(const Signature& s);

struct SectionCounts {
    std::size_t positive = 0;  ///< curvatures >= threshold
    std::size_t negative = 0;  ///< curvatures <= -threshold
    std::size_t small = 0;     ///< curvatures strictly inside (-threshold, threshold)
    std::size_t d = 0;         ///< small + min(positive, negative)
};

inline constexpr double kDefaultCurvatureThreshold = 0.5;

SectionCounts section_signature_counts(const std::vector<double>& curvatures,
                                       double threshold = kDefaultCurvatureThreshold);

/// Affine map x -> matrix * x + shift.
struct AffineMap {
    Matrix matrix;
    Vector shift;

    Vector operator()(const Vector& x) const { return matrix * x + shift; }
    AffineMap then(const AffineMap& next) const;
    std::size_t dim() const noexcept { return static_cast<std::size_t>(shift.size()); }
};

/// Curve in R^n with polynomial components; components[i][k] is the
/// coefficient of t^k in the i-th coordinate.
class PolynomialCurve {
public:
    explicit PolynomialCurve(std::vector<std::vector<double>> components);

    std::size_t n() const noexcept { return components_.size(); }
    const std::vector<std::vector<double>>& components() const noexcept { return components_; }

    Vector point(double t) const;
    /// order-th derivative (order 0 is the point itself).
    Vector derivative(std::size_t order, double t) const;
    /// Apply x -> map(x) to the curve (stays polynomial).
    PolynomialCurve transformed(const AffineMap& map) const;

private:
    std::vector<std::vector<double>> components_;
};

/// The normalized curves (C_11 t + ... + C_1n t^n, ..., C_nn t^n).
class ModelCurve {
public:
    /// coeffs(i, j) for i <= j is the coefficient of t^(j+1) in coordinate i.
    ModelCurve(Matrix coeffs, double kappa);
    static ModelCurve moment(std::size_t n);

    std::size_t n() const noexcept { return static_cast<std::size_t>(coeffs_.rows()); }
    const Matrix& coeffs() const noexcept { return coeffs_; }
    double kappa() const noexcept { return kappa_; }
    PolynomialCurve polynomial() const;

private:
    Matrix coeffs_;
    double kappa_;
};

/// Point on the model curve, t in [0, 1].
Vector curve_point(const ModelCurve& c, double t);

/// det of the matrix with rows Phi'(t), ..., Phi^(n)(t).
double wronskian(const PolynomialCurve& c, double t);
double wronskian(const ModelCurve& c, double t);
/// Same determinant from sampled derivatives (rows Phi', Phi'', ...).
double wronskian(const std::vector<Vector>& derivatives);

struct FrenetNormalization {
    /// Rotation followed by translation: x -> R (x - Phi(t0)).
    AffineMap map;
    /// Taylor coefficients of the transformed curve through degree n,
    /// upper triangular in the ModelCurve convention.
    Matrix coeffs;
};

/// Rigid motion that sends Phi(t0) to the origin and the derivative flag
/// (Phi'(t0), ..., Phi^(n-1)(t0)) into the standard flag, and the local
/// coefficient table of the curve in those coordinates.
FrenetNormalization frenet_normalize(const PolynomialCurve& c, double t0);

/// max_k |<L(Phi^(k)(t0)), e_j>| over j > k: the ladder residual.
double frenet_ladder_residual(const PolynomialCurve& c, double t0,
                              const FrenetNormalization& frame);

}  // namespace declab
