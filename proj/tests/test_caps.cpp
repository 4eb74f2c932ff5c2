#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "declab/caps.hpp"
#include "declab/error.hpp"

using namespace declab;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Vector moment_point(std::size_t n, double t) {
    Vector x(static_cast<Eigen::Index>(n));
    double p = 1;
    for (std::size_t k = 0; k < n; ++k) x[static_cast<Eigen::Index>(k)] = (p *= t);
    return x;
}

}  // namespace

TEST_CASE("hypersurface partitions") {
    CHECK(partition_hypersurface(Signature({1}), 1.0 / 16).size() == 4);
    CHECK(partition_hypersurface(Signature({1}), 1.0 / 16).side() == 0.25);
    CHECK(partition_hypersurface(Signature({1, -1}), 1.0 / 16).size() == 16);
    CHECK(partition_hypersurface(Signature({1}), 1.0).size() == 1);
    // Odd exponents round the side down to the next dyadic.
    CHECK(partition_hypersurface(Signature({1}), 1.0 / 32).side() == 0.125);
    CHECK_THROWS_AS(partition_hypersurface(Signature({1}), 0.1), ContractError);
}

TEST_CASE("curve partitions") {
    auto p = partition_curve(2, 1.0 / 64);
    CHECK(p.size() == 8);
    CHECK(p.side() == 0.125);
    CHECK(partition_curve(3, 1.0 / 512).size() == 8);
    CHECK(partition_curve(3, 1.0).size() == 1);
    CHECK_THROWS_AS(partition_curve(3, 1.0 / 32), ContractError);
}

TEST_CASE("partition is a disjoint cover") {
    const auto part = partition_hypersurface(Signature({1, -1}), 1.0 / 16);
    const double step = part.delta() / 4;
    const int count = static_cast<int>(std::lround(1 / step));
    for (int i = 0; i <= count; ++i) {
        for (int j = 0; j <= count; ++j) {
            const Vector b = vec({-0.5 + i * step, -0.5 + j * step});
            std::size_t owners = 0;
            for (const auto& c : part.caps()) owners += c.contains(b) ? 1 : 0;
            CHECK(owners == 1);
            CHECK(part[part.locate(b)].contains(b));
        }
    }
}

TEST_CASE("assign_atom on the parabola") {
    const Signature s({1});
    const auto part = partition_hypersurface(s, 1.0 / 16);
    const auto& c = assign_atom(part, vec({0.3, 0.09}));
    CHECK(c.lower[0] == 0.25);
    CHECK(assign_atom(part, vec({0.25, 0.0625})).lower[0] == 0.25);
    CHECK(assign_atom(part, vec({0.5, 0.25})).lower[0] == 0.25);
    CHECK(assign_atom(part, vec({-0.5, 0.25})).lower[0] == -0.5);
    try {
        assign_atom(part, vec({0.3, 0.09 + 2.0 / 16}));
        FAIL("expected rejection");
    } catch (const RejectionError& e) {
        CHECK(e.distance() == doctest::Approx(2.0 / 16));
    }
    CHECK_THROWS_AS(assign_atom(part, vec({0.7, 0.49})), RejectionError);
}

TEST_CASE("assign_atom on curves") {
    const auto part = partition_curve(2, 1.0 / 64);
    CHECK(assign_atom(part, moment_point(2, 0.3)).lower[0] == 0.25);
    CHECK(assign_atom(part, moment_point(2, 0.125)).lower[0] == 0.125);
    CHECK(assign_atom(part, moment_point(2, 1.0)).lower[0] == 0.875);
    Vector off = moment_point(2, 0.6);
    off[1] += 1.0 / 128;
    CHECK(assign_atom(part, off).lower[0] == 0.5);
    off[1] += 1.0 / 32;
    CHECK_THROWS_AS(assign_atom(part, off), RejectionError);
}

TEST_CASE("curve_rescale") {
    const auto flat = curve_rescale(0, 1.0 / 64, 2);
    const double sigma = std::pow(1.0 / 64, 1.0 / 3);
    CHECK(flat.matrix(0, 0) == doctest::Approx(1 / sigma));
    CHECK(flat.matrix(1, 1) == doctest::Approx(1 / (sigma * sigma)));
    CHECK(flat.matrix(1, 0) == 0);
    CHECK(flat.shift.norm() == 0);

    const auto m = curve_rescale(0.25, 1.0 / 64, 2);
    CHECK((m(moment_point(2, 0.375)) - moment_point(2, 0.5)).norm() < 1e-14);

    std::mt19937_64 rng(17);
    for (std::size_t n = 2; n <= 4; ++n) {
        const double delta = std::pow(2.0, -static_cast<double>(n + 1) * 2);
        const double sg = std::pow(delta, 1.0 / static_cast<double>(n + 1));
        std::uniform_real_distribution<double> ua(0, 1 - sg), ut(0, 1);
        for (int trial = 0; trial < 100; ++trial) {
            const double a = ua(rng), t = ut(rng);
            const auto map = curve_rescale(a, delta, n);
            const Vector img = map(moment_point(n, t));
            const Vector expect = moment_point(n, (t - a) / sg);
            CHECK((img - expect).norm() <= 1e-9 * std::max(1.0, expect.norm()));
        }
    }
    CHECK_THROWS_AS(curve_rescale(0.9, 1.0 / 64, 2), ContractError);
}

TEST_CASE("curve_rescale keeps neighbourhood atoms near the curve") {
    const std::size_t n = 2;
    const double delta = 1.0 / 4096;
    const double sg = std::pow(delta, 1.0 / 3);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> us(0, 1), ud(-1, 1);
    const ModelCurve model = ModelCurve::moment(n);
    // Factor 2 holds for left endpoints up to 1/2; further right the
    // operator norm of the linear part bounds the spread.
    for (double a : {0.0, 0.3, 0.5, 1 - sg}) {
        const auto map = curve_rescale(a, delta, n);
        const double slack = a <= 0.5 ? 2 * sg : map.matrix.operatorNorm() * delta + 1e-12;
        for (int trial = 0; trial < 100; ++trial) {
            Vector x = moment_point(n, a + us(rng) * sg);
            Vector bump(2);
            bump << ud(rng), ud(rng);
            x += delta * bump.normalized() * std::abs(ud(rng));
            const auto proj = project_to_curve(model, map(x));
            CHECK(proj.distance <= slack);
        }
    }
}

TEST_CASE("parabolic_rescale") {
    const Signature s({1, 1});
    const auto id = parabolic_rescale(s, vec({0, 0}), 1);
    CHECK((id.matrix - Matrix::Identity(3, 3)).norm() == 0);
    CHECK(id.shift.norm() == 0);

    const auto m = parabolic_rescale(s, vec({0.25, 0}), 0.25);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = u(rng), b = u(rng);
        const Vector img = m(paraboloid_lift(s, vec({0.25 + a / 4, b / 4})));
        CHECK((img - vec({a, b, a * a + b * b})).norm() < 1e-12);
    }

    const Signature h({1, -2, 0.5});
    const Vector c = vec({0.1, -0.2, 0.3});
    const double sigma = 0.125;
    const auto mh = parabolic_rescale(h, c, sigma);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector base = c + sigma * vec({u(rng), u(rng), u(rng)});
        Vector x = paraboloid_lift(h, base);
        const double dev = 1e-3 * u(rng);
        x[3] += dev;
        const Vector y = mh(x);
        CHECK(std::abs(y[3] - h.form(y.head(3)) - dev / (sigma * sigma)) < 1e-12);
    }
}
