#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "declab/error.hpp"
#include "declab/geometry.hpp"

using namespace declab;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// Laplace expansion along the first row.
double cofactor_det(const Matrix& m) {
    const auto n = m.rows();
    if (n == 1) return m(0, 0);
    double total = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        Matrix minor(n - 1, n - 1);
        for (Eigen::Index r = 1; r < n; ++r)
            for (Eigen::Index c = 0, cc = 0; c < n; ++c)
                if (c != j) minor(r - 1, cc++) = m(r, c);
        total += ((j % 2) ? -1.0 : 1.0) * m(0, j) * cofactor_det(minor);
    }
    return total;
}

Matrix random_rotation(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g;
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ();
    if (q.determinant() < 0) q.col(0) *= -1;
    return q;
}

}  // namespace

TEST_CASE("signature_d counts the minority sign") {
    CHECK(signature_d(Signature({1, 1})) == 0);
    CHECK(signature_d(Signature({1, -1})) == 1);
    CHECK(signature_d(Signature({1, 1, -1})) == 1);
    CHECK_THROWS_AS(Signature({1, 0}), ContractError);
    CHECK_THROWS_AS(Signature({}), ContractError);
}

TEST_CASE("paraboloid_lift") {
    CHECK(paraboloid_lift(Signature({1, 1}), vec({0, 0})).isApprox(vec({0, 0, 0})));
    for (double t : {-0.5, -0.2, 0.0, 0.37}) {
        const Vector x = paraboloid_lift(Signature({1, -1}), vec({t, t}));
        CHECK(x[2] == 0.0);
        CHECK(x[0] == t);
    }
    CHECK((paraboloid_lift(Signature({1, 1}), vec({0.5, 0.5})) - vec({0.5, 0.5, 0.5})).norm() == 0);
    CHECK_THROWS_AS(paraboloid_lift(Signature({1, 1}), vec({0.6, 0})), DomainError);
}

TEST_CASE("unit_normal") {
    CHECK((unit_normal(Signature({2, -3}), vec({0, 0})) - vec({0, 0, 1})).norm() < 1e-15);
    CHECK((unit_normal(Signature({1, 1}), vec({0.5, 0})) - vec({-1, 0, 1}) / std::sqrt(2.0)).norm() < 1e-15);
    const double t = 0.3;
    CHECK((unit_normal(Signature({1, -1}), vec({t, t})) - vec({-2 * t, 2 * t, 1}) / std::sqrt(1 + 8 * t * t))
              .norm() < 1e-15);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.45, 0.45);
    const Signature s({1.5, -0.7, 2});
    for (int trial = 0; trial < 50; ++trial) {
        const Vector b = vec({u(rng), u(rng), u(rng)});
        const Vector nrm = unit_normal(s, b);
        CHECK(std::abs(nrm.norm() - 1) < 1e-12);
        CHECK(nrm[3] > 0);
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < 3; ++i) {
            Vector bp = b, bm = b;
            bp[i] += h;
            bm[i] -= h;
            const Vector tangent = (paraboloid_lift(s, bp) - paraboloid_lift(s, bm)) / (2 * h);
            CHECK(std::abs(tangent.dot(nrm)) < 1e-6);
        }
    }
}

TEST_CASE("transversality_volume") {
    std::vector<Vector> basis{vec({1, 0, 0}), vec({0, 1, 0}), vec({0, 0, 1})};
    CHECK(transversality_volume(basis) == doctest::Approx(1.0));

    const Signature hyp({1, -1});
    std::vector<Vector> null_line{unit_normal(hyp, vec({-0.4, -0.4})), unit_normal(hyp, vec({0.1, 0.1})),
                                  unit_normal(hyp, vec({0.45, 0.45}))};
    CHECK(transversality_volume(null_line) < 1e-15);

    const Signature ell({1, 1});
    std::vector<Vector> spread{unit_normal(ell, vec({0, 0})), unit_normal(ell, vec({0.3, 0})),
                               unit_normal(ell, vec({0, 0.3}))};
    Matrix m(3, 3);
    for (int i = 0; i < 3; ++i) m.row(i) = spread[static_cast<std::size_t>(i)].transpose();
    const double vol = transversality_volume(spread);
    CHECK(vol > 0);
    CHECK(vol == doctest::Approx(std::abs(cofactor_det(m))).epsilon(1e-12));

    CHECK_THROWS_AS(transversality_volume({vec({1, 0}), vec({0, 1}), vec({1, 0})}), ContractError);
    CHECK_THROWS_AS(transversality_volume({vec({2, 0}), vec({0, 1})}), ContractError);
}

TEST_CASE("transversality_volume matches cofactor expansion and ignores order") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (Eigen::Index n = 2; n <= 4; ++n) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Vector> rows;
            Matrix m(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                Vector v(n);
                for (Eigen::Index j = 0; j < n; ++j) v[j] = g(rng);
                v.normalize();
                rows.push_back(v);
                m.row(i) = v.transpose();
            }
            const double vol = transversality_volume(rows);
            CHECK(vol == doctest::Approx(std::abs(cofactor_det(m))).epsilon(1e-12));
            std::reverse(rows.begin(), rows.end());
            CHECK(transversality_volume(rows) == doctest::Approx(vol).epsilon(1e-12));
        }
    }
}

TEST_CASE("section curvatures of quadric sections") {
    const Signature hyp({1, -1});
    const Hyperplane diag = Hyperplane::through(vec({1, -1}), 0);
    for (double t : {-0.4, 0.0, 0.25}) {
        const auto k = section_curvatures(hyp, diag, vec({t, t}));
        REQUIRE(k.size() == 1);
        CHECK(std::abs(k[0]) < 1e-12);
    }

    const auto vertex = section_curvatures(Signature({1, 1}), Hyperplane(vec({0, 1}), 0), vec({0, 0}));
    REQUIRE(vertex.size() == 1);
    CHECK(vertex[0] == doctest::Approx(2.0).epsilon(1e-14));

    // Curvature of t -> (t, t^2) at t = x is 2 / (1 + 4x^2)^{3/2}.
    const auto off = section_curvatures(Signature({1, 1}), Hyperplane(vec({0, 1}), 0), vec({0.3, 0}));
    CHECK(off[0] == doctest::Approx(2.0 / std::pow(1 + 0.36, 1.5)).epsilon(1e-13));

    const Signature s4({1, 1, -1});
    const Hyperplane e = Hyperplane::through(vec({1, 0, 1}), 0);
    const auto k4 = section_curvatures(s4, e, vec({0.2, -0.1, -0.2}));
    REQUIRE(k4.size() == 2);
    CHECK(std::abs(k4[0]) < 1e-12);
    CHECK(std::abs(k4[1]) > 0.5);

    CHECK_THROWS_AS(section_curvatures(hyp, diag, vec({0.1, 0.2})), DomainError);
    CHECK_THROWS_AS(section_curvatures(Signature({1}), Hyperplane(vec({1}), 0), vec({0})), ContractError);
}

TEST_CASE("at most one small curvature on random sections") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (std::size_t n = 3; n <= 5; ++n) {
        std::vector<double> entries;
        for (std::size_t i = 0; i + 1 < n; ++i) entries.push_back(i % 2 ? -1.0 - 0.3 * static_cast<double>(i) : 1.0);
        const Signature s(entries);
        const double delta0 = small_curvature_threshold(s);
        const auto m = static_cast<Eigen::Index>(n - 1);
        for (int trial = 0; trial < 100; ++trial) {
            Vector nrm(m), y(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                nrm[i] = g(rng);
                y[i] = u(rng);
            }
            nrm.normalize();
            // Project y onto the plane, staying inside the box.
            const double off = nrm.dot(y) * 0.5;
            Vector base = y - (nrm.dot(y) - off) * nrm;
            if (base.cwiseAbs().maxCoeff() > 0.5) continue;
            const auto k = section_curvatures(s, Hyperplane(nrm, off), base);
            CHECK(k.size() == n - 2);
            CHECK(section_signature_counts(k, delta0).small <= 1);
        }
    }
}

TEST_CASE("section_signature_counts") {
    auto c = section_signature_counts({2, -2, 0.1}, 1);
    CHECK(c.positive == 1);
    CHECK(c.negative == 1);
    CHECK(c.small == 1);
    CHECK(c.d == 2);
    c = section_signature_counts({0}, 1);
    CHECK(c.small == 1);
    CHECK(c.d == 1);
    c = section_signature_counts({2}, 1);
    CHECK(c.positive == 1);
    CHECK(c.d == 0);
    CHECK(section_signature_counts({0.7}).positive == 1);
}

TEST_CASE("model curves and Wronskians") {
    const auto m3 = ModelCurve::moment(3);
    CHECK((curve_point(m3, 0.5) - vec({0.5, 0.25, 0.125})).norm() < 1e-15);
    CHECK(curve_point(m3, 0).norm() == 0);
    Matrix c2(2, 2);
    c2 << 1, 1, 0, 1;
    CHECK((curve_point(ModelCurve(c2, 1), 1) - vec({2, 1})).norm() < 1e-15);
    CHECK_THROWS_AS(curve_point(m3, 1.5), DomainError);

    for (double t : {0.0, 0.3, 0.9}) {
        CHECK(wronskian(ModelCurve::moment(2), t) == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(wronskian(m3, t) == doctest::Approx(12.0).epsilon(1e-14));
    }
    const PolynomialCurve dependent({{0, 1, 3}, {0, 1, 3}});
    CHECK(wronskian(dependent, 0.4) == 0.0);

    Matrix bad(2, 2);
    bad << 1, 0, 0.01, 1;
    CHECK_THROWS_AS(ModelCurve(bad, 0.5), ContractError);
}

TEST_CASE("frenet normalization") {
    const PolynomialCurve moment3 = ModelCurve::moment(3).polynomial();
    const auto id = frenet_normalize(moment3, 0.0);
    CHECK((id.map.matrix - Matrix::Identity(3, 3)).norm() < 1e-15);
    CHECK((id.coeffs - Matrix::Identity(3, 3)).norm() < 1e-15);

    const PolynomialCurve moment2 = ModelCurve::moment(2).polynomial();
    const auto half = frenet_normalize(moment2, 0.5);
    // Phi'(1/2) = (1, 1): C_11 is its length.
    CHECK(half.coeffs(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    const double kappa = 1 / std::sqrt(2.0);
    CHECK(std::abs(half.coeffs(0, 0)) >= kappa);
    CHECK(std::abs(half.coeffs(0, 0)) <= 1 / kappa);
    CHECK(frenet_ladder_residual(moment2, 0.5, half) < 1e-12);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const PolynomialCurve curve({{0.1, 1, 0.3, -0.2}, {0, 0.2, 1, 0.5}, {0.3, 0, 0.1, 1}});
    for (double t0 : {0.0, 0.4, 0.8}) {
        const auto base = frenet_normalize(curve, t0);
        CHECK(frenet_ladder_residual(curve, t0, base) < 1e-10);
        CHECK(base.map.matrix.determinant() == doctest::Approx(1.0));
        for (int trial = 0; trial < 5; ++trial) {
            AffineMap motion{random_rotation(rng, 3), vec({g(rng), g(rng), g(rng)})};
            const auto moved = frenet_normalize(curve.transformed(motion), t0);
            CHECK((moved.coeffs - base.coeffs).norm() < 1e-10);
        }
    }

    CHECK_THROWS_AS(frenet_normalize(PolynomialCurve({{0, 1, 3}, {0, 1, 3}}), 0.2), DomainError);
}
