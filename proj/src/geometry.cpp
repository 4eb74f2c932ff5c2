#include "declab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "declab/error.hpp"

namespace declab {

namespace {

constexpr double kUnitTolerance = 1e-12;
constexpr double kBoxSlack = 1e-12;
constexpr double kMaxJacobianCondition = 1e8;

void require_in_box(const Vector& base, const char* who) {
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        if (!(std::abs(base[i]) <= 0.5 + kBoxSlack)) {
            std::ostringstream msg;
            msg << who << ": base coordinate " << i << " = " << base[i]
                << " outside [-1/2, 1/2]";
            throw DomainError(msg.str());
        }
    }
}

double factorial(std::size_t k) {
    double f = 1;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// Signature

Signature::Signature(std::vector<double> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw ContractError("Signature: need at least one entry");
    for (double e : entries_) {
        if (!std::isfinite(e) || e == 0.0)
            throw ContractError("Signature: entries must be finite and nonzero");
    }
}

std::size_t Signature::positives() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](double e) { return e > 0; }));
}

std::size_t Signature::negatives() const noexcept { return entries_.size() - positives(); }

double Signature::form(const Vector& base) const {
    double q = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) q += entries_[i] * base[i] * base[i];
    return q;
}

std::size_t signature_d(const Signature& s) { return std::min(s.positives(), s.negatives()); }

Vector paraboloid_lift(const Signature& s, const Vector& base) {
    if (static_cast<std::size_t>(base.size()) != s.base_dim())
        throw ContractError("paraboloid_lift: base dimension mismatch");
    require_in_box(base, "paraboloid_lift");
    Vector x(s.n());
    x.head(s.base_dim()) = base;
    x[s.base_dim()] = s.form(base);
    return x;
}

Vector unit_normal(const Signature& s, const Vector& base) {
    if (static_cast<std::size_t>(base.size()) != s.base_dim())
        throw ContractError("unit_normal: base dimension mismatch");
    Vector g(s.n());
    for (std::size_t i = 0; i < s.base_dim(); ++i) g[i] = -2.0 * s[i] * base[i];
    g[s.base_dim()] = 1.0;
    return g / g.norm();
}

double transversality_volume(const std::vector<Vector>& normals) {
    const std::size_t n = normals.size();
    if (n == 0) throw ContractError("transversality_volume: no normals");
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(normals[i].size()) != n)
            throw ContractError("transversality_volume: need n vectors in R^n");
        if (std::abs(normals[i].norm() - 1.0) > kUnitTolerance)
            throw ContractError("transversality_volume: normals must be unit vectors");
        m.row(static_cast<Eigen::Index>(i)) = normals[i].transpose();
    }
    return std::abs(m.fullPivLu().determinant());
}

// ---------------------------------------------------------------------------
// Hyperplane sections

Hyperplane::Hyperplane(Vector unit_normal, double off)
    : normal(std::move(unit_normal)), offset(off) {
    if (std::abs(normal.norm() - 1.0) > kUnitTolerance)
        throw ContractError("Hyperplane: normal must have unit length");
}

Hyperplane Hyperplane::through(const Vector& normal, double offset) {
    const double len = normal.norm();
    if (!(len > 0)) throw ContractError("Hyperplane: zero normal");
    return Hyperplane(normal / len, offset / len);
}

std::vector<double> section_curvatures(const Signature& s, const Hyperplane& plane,
                                       const Vector& base_point) {
    const auto m = static_cast<Eigen::Index>(s.base_dim());
    if (s.n() < 3) throw ContractError("section_curvatures: need n >= 3");
    if (plane.normal.size() != m || base_point.size() != m)
        throw ContractError("section_curvatures: dimension mismatch");
    require_in_box(base_point, "section_curvatures");
    if (std::abs(plane.normal.dot(base_point) - plane.offset) > 1e-9)
        throw DomainError("section_curvatures: query point does not lie on the hyperplane");

    // Orthonormal coordinates u on E: y = y0 + U u.
    Eigen::HouseholderQR<Matrix> qr(plane.normal);
    const Matrix q = qr.householderQ();
    const Matrix basis = q.rightCols(m - 1);

    // Section height Q(u) = sum s_i (y0 + U u)_i^2, a quadric in u.
    Vector weights(m);
    for (Eigen::Index i = 0; i < m; ++i) weights[i] = s[static_cast<std::size_t>(i)];
    const Vector grad = basis.transpose() * (2.0 * weights.cwiseProduct(base_point));
    const Matrix hess = basis.transpose() * (2.0 * weights).asDiagonal() * basis;

    // Parametrization u -> (y0 + U u, Q(u)) has Jacobian [U; grad^T].
    Matrix jac(m + 1, m - 1);
    jac.topRows(m) = basis;
    jac.row(m) = grad.transpose();
    const Eigen::JacobiSVD<Matrix> svd(jac);
    const auto& sv = svd.singularValues();
    if (sv.minCoeff() <= 0 || sv.maxCoeff() / sv.minCoeff() > kMaxJacobianCondition)
        throw DomainError("section_curvatures: degenerate section parametrization");

    // Shape operator of a graph: G^{-1} H / sqrt(1 + |grad|^2), G = I + grad grad^T.
    // Its eigenvalues are those of G^{-1/2} H G^{-1/2} (symmetric).
    const double g2 = grad.squaredNorm();
    const double w = 1.0 / std::sqrt(1.0 + g2);
    Matrix g_inv_half = Matrix::Identity(m - 1, m - 1);
    if (g2 > 0) {
        const Vector dir = grad / std::sqrt(g2);
        g_inv_half += (w - 1.0) * dir * dir.transpose();
    }
    const Matrix shape = w * g_inv_half * hess * g_inv_half;
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(shape);

    std::vector<double> out(eig.eigenvalues().data(),
                            eig.eigenvalues().data() + eig.eigenvalues().size());
    std::sort(out.begin(), out.end(),
              [](double a, double b) { return std::abs(a) < std::abs(b); });
    return out;
}

double small_curvature_threshold(const Signature& s) {
    double min_abs = std::abs(s[0]);
    double sum_sq = 0;
    for (double e : s.entries()) {
        min_abs = std::min(min_abs, std::abs(e));
        sum_sq += e * e;
    }
    // |grad Q| <= sqrt(sum s_i^2) on the unit box; the graph factor
    // (1 + |grad|^2)^{3/2} bounds how much a Hessian eigenvalue can shrink.
    return min_abs / std::pow(1.0 + sum_sq, 1.5);
}

SectionCounts section_signature_counts(const std::vector<double>& curvatures,
                                       double threshold) {
    if (!(threshold > 0)) throw ContractError("section_signature_counts: threshold must be > 0");
    SectionCounts c;
    for (double k : curvatures) {
        if (k >= threshold)
            ++c.positive;
        else if (k <= -threshold)
            ++c.negative;
        else
            ++c.small;
    }
    c.d = c.small + std::min(c.positive, c.negative);
    return c;
}

// ---------------------------------------------------------------------------
// Curves

AffineMap AffineMap::then(const AffineMap& next) const {
    return AffineMap{next.matrix * matrix, next.matrix * shift + next.shift};
}

PolynomialCurve::PolynomialCurve(std::vector<std::vector<double>> components)
    : components_(std::move(components)) {
    if (components_.empty()) throw ContractError("PolynomialCurve: no components");
}

Vector PolynomialCurve::point(double t) const { return derivative(0, t); }

Vector PolynomialCurve::derivative(std::size_t order, double t) const {
    Vector out(n());
    for (std::size_t i = 0; i < n(); ++i) {
        const auto& c = components_[i];
        // Horner on the differentiated coefficients.
        double acc = 0;
        for (std::size_t k = c.size(); k-- > order;) {
            double falling = 1;
            for (std::size_t j = 0; j < order; ++j) falling *= static_cast<double>(k - j);
            acc = acc * t + falling * c[k];
        }
        out[static_cast<Eigen::Index>(i)] = acc;
    }
    return out;
}

PolynomialCurve PolynomialCurve::transformed(const AffineMap& map) const {
    if (map.dim() != n()) throw ContractError("PolynomialCurve::transformed: dimension mismatch");
    std::size_t degree = 0;
    for (const auto& c : components_) degree = std::max(degree, c.size());
    std::vector<std::vector<double>> out(n(), std::vector<double>(std::max<std::size_t>(degree, 1), 0.0));
    for (std::size_t i = 0; i < n(); ++i) {
        for (std::size_t j = 0; j < n(); ++j) {
            const double a = map.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            for (std::size_t k = 0; k < components_[j].size(); ++k) out[i][k] += a * components_[j][k];
        }
        out[i][0] += map.shift[static_cast<Eigen::Index>(i)];
    }
    return PolynomialCurve(std::move(out));
}

ModelCurve::ModelCurve(Matrix coeffs, double kappa) : coeffs_(std::move(coeffs)), kappa_(kappa) {
    const auto n = coeffs_.rows();
    if (n < 1 || coeffs_.cols() != n) throw ContractError("ModelCurve: need a square table");
    if (!(kappa_ > 0 && kappa_ <= 1)) throw ContractError("ModelCurve: kappa must lie in (0, 1]");
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double c = std::abs(coeffs_(i, j));
            if (j < i && c != 0) throw ContractError("ModelCurve: table must be upper triangular");
            if (j == i && (c < kappa_ || c > 1 / kappa_))
                throw ContractError("ModelCurve: diagonal entry violates kappa bounds");
            if (j > i && c > 1 / kappa_)
                throw ContractError("ModelCurve: off-diagonal entry violates kappa bound");
        }
    }
}

ModelCurve ModelCurve::moment(std::size_t n) {
    return ModelCurve(Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), 1.0);
}

PolynomialCurve ModelCurve::polynomial() const {
    std::vector<std::vector<double>> comps(n(), std::vector<double>(n() + 1, 0.0));
    for (std::size_t i = 0; i < n(); ++i)
        for (std::size_t j = i; j < n(); ++j)
            comps[i][j + 1] = coeffs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return PolynomialCurve(std::move(comps));
}

Vector curve_point(const ModelCurve& c, double t) {
    if (!(t >= 0 && t <= 1)) throw DomainError("curve_point: t must lie in [0, 1]");
    return c.polynomial().point(t);
}

double wronskian(const std::vector<Vector>& derivatives) {
    const std::size_t n = derivatives.size();
    if (n == 0) throw ContractError("wronskian: no derivatives");
    Matrix m(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        if (static_cast<std::size_t>(derivatives[k].size()) != n)
            throw ContractError("wronskian: need n derivatives in R^n");
        m.row(static_cast<Eigen::Index>(k)) = derivatives[k].transpose();
    }
    return m.fullPivLu().determinant();
}

double wronskian(const PolynomialCurve& c, double t) {
    std::vector<Vector> rows;
    for (std::size_t k = 1; k <= c.n(); ++k) rows.push_back(c.derivative(k, t));
    return wronskian(rows);
}

double wronskian(const ModelCurve& c, double t) { return wronskian(c.polynomial(), t); }

FrenetNormalization frenet_normalize(const PolynomialCurve& c, double t0) {
    const std::size_t n = c.n();
    const auto ni = static_cast<Eigen::Index>(n);
    Matrix frame(ni, ni);  // rows are the new orthonormal axes
    for (std::size_t k = 0; k < n; ++k) {
        const Vector d = c.derivative(k + 1, t0);
        Vector v = d;
        // Modified Gram-Schmidt, twice for stability.
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t j = 0; j < k; ++j) {
                const auto jr = static_cast<Eigen::Index>(j);
                v -= frame.row(jr).dot(v) * frame.row(jr).transpose();
            }
        const double len = v.norm();
        if (!(len > 1e-12 * std::max(1.0, d.norm())))
            throw DomainError("frenet_normalize: derivative flag is degenerate at t0");
        frame.row(static_cast<Eigen::Index>(k)) = (v / len).transpose();
    }
    if (frame.determinant() < 0) frame.row(ni - 1) *= -1.0;

    FrenetNormalization out;
    out.map.matrix = frame;
    out.map.shift = -(frame * c.point(t0));
    out.coeffs = Matrix::Zero(ni, ni);
    for (std::size_t j = 0; j < n; ++j) {
        const Vector local = frame * c.derivative(j + 1, t0) / factorial(j + 1);
        for (std::size_t i = 0; i <= j; ++i)
            out.coeffs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                local[static_cast<Eigen::Index>(i)];
    }
    return out;
}

double frenet_ladder_residual(const PolynomialCurve& c, double t0,
                              const FrenetNormalization& frame) {
    double worst = std::abs(frame.map(c.point(t0)).norm());
    for (std::size_t k = 1; k < c.n(); ++k) {
        const Vector v = frame.map.matrix * c.derivative(k, t0);
        for (std::size_t j = k; j < c.n(); ++j)
            worst = std::max(worst, std::abs(v[static_cast<Eigen::Index>(j)]));
    }
    return worst;
}

}  // namespace declab
