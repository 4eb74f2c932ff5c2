#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "declab/decoupling.hpp"
#include "declab/error.hpp"

using namespace declab;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

RatioOptions quick() {
    RatioOptions o;
    o.refine = false;
    return o;
}

const Signature parabola({1.0});

}  // namespace

TEST_CASE("single cap ratio is at most one and exactly one without weight") {
    const double delta = 1.0 / 64;
    const auto caps = partition_hypersurface(parabola, delta);
    FrequencySet f(2);
    for (double x : {-0.5, -0.48, -0.45, -0.4})
        f.add(paraboloid_lift(parabola, vec({x})), Complex(1.0, x));
    const auto grid = default_ratio_grid(2, delta, 0.5);
    for (auto q : {OuterNorm::l2, OuterNorm::lp}) {
        const auto m = decoupling_ratio(f, caps, 6, {q}, grid, quick());
        CHECK(m.caps_used == 1);
        CHECK(m.ratio <= 1 + 1e-12);
        auto flat = quick();
        flat.denominator_weight = WeightKind::none;
        CHECK(decoupling_ratio(f, caps, 6, {q}, grid, flat).ratio == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("two atoms in distinct caps are orthogonal on a torus cell") {
    const double delta = 1.0 / 16;
    const auto caps = partition_hypersurface(parabola, delta);
    FrequencySet f(2);
    f.add(paraboloid_lift(parabola, vec({-0.5})), Complex(2.0, -1.0));
    f.add(paraboloid_lift(parabola, vec({0.25})), Complex(0.5, 3.0));
    f.set_lattice(delta);
    const std::vector<std::size_t> samples{exact_cell_samples(f.spread(0), 16, 2),
                                           exact_cell_samples(f.spread(1), 16, 2)};
    const auto cell = GridSpec::cell(vec({0.0, 0.0}), {16.0, 16.0}, samples);
    auto opt = quick();
    opt.denominator_weight = WeightKind::none;
    const auto m = decoupling_ratio(f, caps, 2, {OuterNorm::l2}, cell, opt);
    CHECK(m.caps_used == 2);
    CHECK(m.ratio == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("trivial bounds and the flavor relation on the grid surrogate") {
    const double delta = 1.0 / 64;
    const auto f = sharp_example_surface(parabola, delta);
    const auto caps = partition_hypersurface(parabola, delta);
    const auto grid = default_ratio_grid(2, delta);
    for (double p : {4.0, 6.0, 8.0}) {
        const auto m = decoupling_ratio(f, caps, p, {OuterNorm::l2}, grid, quick());
        const double M = static_cast<double>(m.caps_used);
        CHECK(M == 8);
        const double l2 = m.ratio_for(OuterNorm::l2), lp = m.ratio_for(OuterNorm::lp);
        CHECK(l2 == doctest::Approx(m.ratio));
        CHECK(lp <= std::pow(M, 1 - 2 / p) * 1.05);
        CHECK(l2 <= std::pow(M, 0.5 - 1 / p) * 1.05);
        CHECK(l2 >= lp / std::pow(M, 0.5 - 1 / p) * (1 - 1e-12));
    }
}

TEST_CASE("multilinear ratio obeys the Hoelder bound by the linear ratios of its factors") {
    const double delta = 1.0 / 64;
    const auto f = sharp_example_surface(parabola, delta);
    const auto caps = partition_hypersurface(parabola, delta);
    const auto grid = default_ratio_grid(2, delta, 0.5);
    const auto groups = default_transverse_groups(1, 2);
    CHECK(group_transversality(parabola, groups) > 0.125);

    DecouplingFlavor multi{OuterNorm::l2, 2, 0.125};
    const auto m = decoupling_ratio(f, caps, 6, multi, grid, quick());
    REQUIRE(m.cap_norms.size() == 2);
    CHECK(m.cap_norms[0].size() == 2);
    CHECK(m.cap_norms[1].size() == 2);

    double bound = 1;
    for (const auto& g : groups) {
        FrequencySet part(2);
        for (const auto& a : f.atoms())
            if (a.xi[0] >= g.lower[0] && a.xi[0] < g.lower[0] + g.side) part.add(a.xi, a.a);
        bound *= std::sqrt(decoupling_ratio(part, caps, 6, {OuterNorm::l2}, grid, quick()).ratio);
    }
    CHECK(m.ratio <= bound * 1.05);
}

TEST_CASE("decoupling_ratio reports invalid inputs") {
    const double delta = 1.0 / 64;
    const auto caps = partition_hypersurface(parabola, delta);
    const auto grid = default_ratio_grid(2, delta, 0.5);
    CHECK_THROWS_AS(decoupling_ratio(FrequencySet(2), caps, 6, {}, grid, quick()), ContractError);

    FrequencySet off(2);
    off.add(vec({0.1, 0.5}), 1.0);
    CHECK_THROWS_AS(decoupling_ratio(off, caps, 6, {}, grid, quick()), RejectionError);

    const auto f = sharp_example_surface(parabola, delta);
    auto opt = quick();
    opt.groups = std::vector<CapGroup>{{vec({-0.5}), 0.25}, {vec({-0.5}), 0.25}};
    CHECK_THROWS_AS(decoupling_ratio(f, caps, 6, {OuterNorm::l2, 2, 0.125}, grid, opt), ContractError);

    FrequencySet left(2);
    left.add(paraboloid_lift(parabola, vec({-0.5})), 1.0);
    CHECK_THROWS_AS(decoupling_ratio(left, caps, 6, {OuterNorm::l2, 2, 0.125}, grid, quick()), ContractError);
}

TEST_CASE("predicted exponents") {
    CHECK(predicted_lp_exponent(2, 6) == doctest::Approx(-1.0 / 6));
    CHECK(predicted_lp_exponent(3, 4) == doctest::Approx(-0.25));
    CHECK(predicted_lp_exponent(3, INFINITY) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(predicted_lp_exponent(2, 5), ContractError);

    CHECK(predicted_l2_exponent(2, 6, parabola) == doctest::Approx(0.0));
    const Signature hyper({1.0, -1.0});
    CHECK(predicted_l2_exponent(3, 4, hyper) == doctest::Approx(-0.125));
    CHECK(predicted_l2_exponent(3, 6, hyper) == doctest::Approx(-1.0 / 6));
    CHECK(predicted_l2_exponent(3, 6 - 1e-9, hyper) == doctest::Approx(-1.0 / 6));
    // Elliptic n = 3: critical index 4.
    CHECK(predicted_l2_exponent(3, 4, Signature({1.0, 1.0})) == doctest::Approx(0.0));
    CHECK(predicted_l2_exponent(3, 3, Signature({1.0, 1.0})) == doctest::Approx(0.0));
    CHECK_THROWS_AS(predicted_l2_exponent(3, 1.5, hyper), ContractError);
}

TEST_CASE("sharp example generators") {
    const double delta = 1.0 / 16;
    const auto f = sharp_example_surface(parabola, delta);
    CHECK(f.size() == 16);
    CHECK(f[0].xi[0] == -0.5);
    const auto caps = partition_hypersurface(parabola, delta);
    std::vector<int> per_cap(caps.size(), 0);
    for (const auto& a : f.atoms()) per_cap[assign_atom(caps, a.xi).index]++;
    for (int c : per_cap) CHECK(c == 4);
    CHECK(f.lattice().has_value());

    const Signature hyper({1.0, -1.0});
    const auto line = sharp_example_subspace(hyper, delta);
    CHECK(line.size() == 16);
    for (const auto& a : line.atoms()) {
        CHECK(a.xi[0] == a.xi[1]);
        CHECK(a.xi[2] == hyper.form(a.xi.head(2)));
        CHECK(std::abs(a.xi[0]) <= 0.5);
    }
    CHECK_THROWS_AS(sharp_example_subspace(Signature({1.0, 1.0}), delta), UnsupportedError);
    CHECK_THROWS_AS(sharp_example_subspace(Signature({1.0, -2.0}), delta), UnsupportedError);
    CHECK(null_pairs(Signature({1.0, 1.0, -1.0, -1.0})).size() == 2);
}

TEST_CASE("exponent fits") {
    std::vector<std::pair<double, double>> pure, scaled, logged;
    const double gamma = 0.3;
    for (int k = 5; k <= 12; ++k) {
        const double d = std::ldexp(1.0, -k);
        pure.emplace_back(d, std::pow(d, -gamma));
        scaled.emplace_back(d, 7 * std::pow(d, -gamma));
        logged.emplace_back(d, std::pow(d, -gamma) * std::log(1 / d));
    }
    const auto a = fit_exponent(pure);
    CHECK(a.slope == doctest::Approx(-gamma).epsilon(1e-12));
    CHECK(a.max_residual < 1e-12);
    const auto b = fit_exponent(scaled);
    CHECK(b.slope == doctest::Approx(-gamma).epsilon(1e-12));
    CHECK(b.intercept == doctest::Approx(std::log2(7.0)));

    // The log factor moves the fitted slope by about 0.17 over this range.
    const auto c = fit_exponent(logged);
    CHECK(std::abs(c.slope + gamma) == doctest::Approx(0.1700).epsilon(0.01));
    CHECK(c.max_residual > 0);

    CHECK_THROWS_AS(fit_exponent({pure.begin(), pure.begin() + 4}), ContractError);
    std::vector<std::pair<double, double>> narrow;
    for (int k = 0; k < 6; ++k) narrow.emplace_back(std::ldexp(1.0, -k) * 0.5 + 0.5, 1.0 + k);
    CHECK_THROWS_AS(fit_exponent(narrow), ContractError);
}
