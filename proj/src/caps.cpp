#include "declab/caps.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "declab/error.hpp"

namespace declab {

namespace {

constexpr double kDomainSlack = 1e-12;

std::size_t axis_index(double x, double lo, double side, std::size_t count) {
    const double u = (x - lo) / side;
    if (u < 0) return 0;
    const auto k = static_cast<std::size_t>(std::floor(u));
    return std::min(k, count - 1);
}

double binomial(std::size_t k, std::size_t j) {
    double b = 1;
    for (std::size_t i = 1; i <= j; ++i) b = b * static_cast<double>(k - j + i) / static_cast<double>(i);
    return b;
}

}  // namespace

Vector Cap::center() const { return lower + Vector::Constant(lower.size(), side / 2); }

bool Cap::contains(const Vector& base) const {
    const double hi_end = kind == CapKind::curve_arc ? 1.0 : 0.5;
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        const double hi = lower[i] + side;
        if (base[i] < lower[i]) return false;
        if (base[i] >= hi && !(std::abs(hi - hi_end) < kDomainSlack && base[i] <= hi_end)) return false;
    }
    return true;
}

CapPartition::CapPartition(CapKind kind, double delta, double side, std::size_t base_dim,
                           std::optional<Signature> surface, std::optional<ModelCurve> curve)
    : kind_(kind), delta_(delta), side_(side), base_dim_(base_dim),
      surface_(std::move(surface)), curve_(std::move(curve)) {
    if (!(side > 0 && side <= 1)) throw ContractError("CapPartition: side must lie in (0, 1]");
    per_axis_ = static_cast<std::size_t>(std::llround(1.0 / side));
    const double lo = kind == CapKind::curve_arc ? 0.0 : -0.5;
    std::size_t total = 1;
    for (std::size_t i = 0; i < base_dim_; ++i) total *= per_axis_;
    caps_.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Cap c;
        c.kind = kind;
        c.index = flat;
        c.side = side;
        c.scale = delta;
        c.lower.resize(static_cast<Eigen::Index>(base_dim_));
        std::size_t rest = flat;
        for (std::size_t i = 0; i < base_dim_; ++i) {
            c.lower[static_cast<Eigen::Index>(i)] = lo + static_cast<double>(rest % per_axis_) * side;
            rest /= per_axis_;
        }
        caps_.push_back(std::move(c));
    }
}

std::size_t CapPartition::locate(const Vector& base) const {
    const double lo = kind_ == CapKind::curve_arc ? 0.0 : -0.5;
    std::size_t flat = 0;
    std::size_t stride = 1;
    for (std::size_t i = 0; i < base_dim_; ++i) {
        const double x = base[static_cast<Eigen::Index>(i)];
        if (!(x >= lo - kDomainSlack && x <= lo + 1.0 + kDomainSlack))
            throw DomainError("CapPartition::locate: point outside the parameter domain");
        flat += axis_index(x, lo, side_, per_axis_) * stride;
        stride *= per_axis_;
    }
    return flat;
}

int dyadic_exponent(double delta) {
    if (!(delta > 0 && delta <= 1)) throw ContractError("scale must lie in (0, 1]");
    int e = 0;
    const double m = std::frexp(delta, &e);
    if (m != 0.5) {
        std::ostringstream msg;
        msg << "scale " << delta << " is not a power of two";
        throw ContractError(msg.str());
    }
    return 1 - e;
}

CapPartition partition_hypersurface(const Signature& s, double delta) {
    const int k = dyadic_exponent(delta);
    const double side = std::ldexp(1.0, -((k + 1) / 2));
    return CapPartition(CapKind::hypersurface_box, delta, side, s.base_dim(), s, std::nullopt);
}

CapPartition partition_curve(const ModelCurve& c, double delta) {
    const int k = dyadic_exponent(delta);
    const auto n = static_cast<int>(c.n());
    if (k % n != 0) {
        std::ostringstream msg;
        msg << "partition_curve: delta^{1/" << n << "} is not dyadic for delta = 2^-" << k;
        throw ContractError(msg.str());
    }
    return CapPartition(CapKind::curve_arc, delta, std::ldexp(1.0, -(k / n)), 1, std::nullopt, c);
}

CapPartition partition_curve(std::size_t n, double delta) {
    return partition_curve(ModelCurve::moment(n), delta);
}

CurveProjection project_to_curve(const ModelCurve& c, const Vector& x, double resolution) {
    const PolynomialCurve poly = c.polynomial();
    const std::size_t samples =
        std::max<std::size_t>(1024, resolution > 0 ? static_cast<std::size_t>(std::ceil(8.0 / resolution)) : 0);
    auto dist2 = [&](double t) { return (poly.point(t) - x).squaredNorm(); };
    std::size_t best = 0;
    double best_d = dist2(0);
    for (std::size_t i = 1; i <= samples; ++i) {
        const double d = dist2(static_cast<double>(i) / static_cast<double>(samples));
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    // Golden-section refinement on the neighbouring sample bracket.
    double lo = static_cast<double>(best == 0 ? 0 : best - 1) / static_cast<double>(samples);
    double hi = static_cast<double>(std::min(best + 1, samples)) / static_cast<double>(samples);
    const double g = (std::sqrt(5.0) - 1) / 2;
    double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    double fa = dist2(a), fb = dist2(b);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = dist2(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = dist2(b);
        }
    }
    double t = (lo + hi) / 2;
    double d = dist2(t);
    if (best_d < d) {
        t = static_cast<double>(best) / static_cast<double>(samples);
        d = best_d;
    }
    return {t, std::sqrt(d)};
}

const Cap& assign_atom(const CapPartition& caps, const Vector& xi) {
    const double delta = caps.delta();
    if (caps.kind() == CapKind::hypersurface_box) {
        const Signature& s = *caps.surface();
        if (static_cast<std::size_t>(xi.size()) != s.n())
            throw ContractError("assign_atom: frequency dimension mismatch");
        const Vector base = xi.head(static_cast<Eigen::Index>(s.base_dim()));
        double outside = 0;
        for (Eigen::Index i = 0; i < base.size(); ++i)
            outside = std::max(outside, std::abs(base[i]) - 0.5);
        if (outside > kDomainSlack) {
            std::ostringstream msg;
            msg << "assign_atom: base projection leaves the unit box by " << outside;
            throw RejectionError(msg.str(), outside);
        }
        const double dev = std::abs(xi[xi.size() - 1] - s.form(base));
        if (dev > delta * (1 + 1e-12)) {
            std::ostringstream msg;
            msg << "assign_atom: vertical deviation " << dev << " exceeds delta " << delta;
            throw RejectionError(msg.str(), dev);
        }
        return caps[caps.locate(base)];
    }
    const ModelCurve& c = *caps.curve();
    if (static_cast<std::size_t>(xi.size()) != c.n())
        throw ContractError("assign_atom: frequency dimension mismatch");
    const CurveProjection proj = project_to_curve(c, xi, caps.side());
    if (proj.distance > delta * (1 + 1e-12)) {
        std::ostringstream msg;
        msg << "assign_atom: distance " << proj.distance << " to the curve exceeds delta " << delta;
        throw RejectionError(msg.str(), proj.distance);
    }
    Vector t(1);
    t[0] = proj.t;
    return caps[caps.locate(t)];
}

AffineMap curve_rescale(double a, double delta, std::size_t n) {
    if (n < 1) throw ContractError("curve_rescale: n must be >= 1");
    if (!(delta > 0 && delta <= 1)) throw ContractError("curve_rescale: delta must lie in (0, 1]");
    const double sigma = std::pow(delta, 1.0 / static_cast<double>(n + 1));
    if (!(a >= -kDomainSlack && a <= 1 - sigma + kDomainSlack))
        throw ContractError("curve_rescale: left endpoint outside [0, 1 - delta^{1/(n+1)}]");
    const auto ni = static_cast<Eigen::Index>(n);
    AffineMap m{Matrix::Zero(ni, ni), Vector::Zero(ni)};
    for (std::size_t k = 1; k <= n; ++k) {
        const double scale = std::pow(sigma, static_cast<double>(k));
        for (std::size_t j = 1; j <= k; ++j)
            m.matrix(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(j - 1)) =
                binomial(k, j) * std::pow(-a, static_cast<double>(k - j)) / scale;
        m.shift[static_cast<Eigen::Index>(k - 1)] = std::pow(-a, static_cast<double>(k)) / scale;
    }
    return m;
}

AffineMap parabolic_rescale(const Signature& s, const Vector& center, double sigma) {
    if (static_cast<std::size_t>(center.size()) != s.base_dim())
        throw ContractError("parabolic_rescale: centre dimension mismatch");
    if (!(sigma > 0 && sigma <= 1)) throw ContractError("parabolic_rescale: sigma must lie in (0, 1]");
    const auto m = static_cast<Eigen::Index>(s.base_dim());
    AffineMap out{Matrix::Zero(m + 1, m + 1), Vector::Zero(m + 1)};
    const double s2 = sigma * sigma;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double u = s[static_cast<std::size_t>(i)];
        out.matrix(i, i) = 1 / sigma;
        out.shift[i] = -center[i] / sigma;
        out.matrix(m, i) = -2 * u * center[i] / s2;
    }
    out.matrix(m, m) = 1 / s2;
    out.shift[m] = s.form(center) / s2;
    return out;
}

}  // namespace declab
