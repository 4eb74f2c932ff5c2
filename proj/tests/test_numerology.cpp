#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "declab/error.hpp"
#include "declab/numerology.hpp"

using namespace declab;

namespace {

Rational Q(long long a, long long b = 1) { return Rational(a, b); }

}  // namespace

TEST_CASE("rational parsing") {
    CHECK(parse_rational("6") == 6);
    CHECK(parse_rational("13/2") == Q(13, 2));
    CHECK(parse_rational("-2.5") == Q(-5, 2));
    CHECK(parse_rational("1e-8") == Q(1, 100000000));
    CHECK(parse_rational("2.5e1") == 25);
    CHECK(parse_exponent("inf").infinite);
    CHECK_THROWS_AS(parse_rational("abc"), ContractError);
    CHECK_THROWS_AS(parse_rational("1/0"), ContractError);
    CHECK(to_string(Q(6, 4)) == "3/2");
    CHECK(to_string(Exponent::infinity()) == "inf");
}

TEST_CASE("critical indices") {
    CHECK(critical_index_signed(3, 0) == 4);
    CHECK(critical_index_signed(3, 1) == 6);
    CHECK(critical_index_signed(5, 2) == 4);
    for (std::size_t n = 2; n <= 10; ++n) CHECK(critical_index_signed(n, 0) == critical_index(n));
    CHECK(critical_index(2) == 6);
    CHECK_THROWS_AS(critical_index_signed(3, 2), ContractError);
}

TEST_CASE("l2 exponent branches meet at the signed critical index") {
    for (std::size_t n = 2; n <= 8; ++n)
        for (std::size_t d = 0; d + 1 < n && 2 * d <= n - 1; ++d) {
            const Rational pc = critical_index_signed(n, d);
            const Rational nn = Q(static_cast<long long>(n)), dd = Q(static_cast<long long>(d));
            const Rational upper = -(nn - 1) / 4 + (nn + 1) / (2 * pc);
            const Rational lower = dd * (Q(-1, 4) + 1 / (2 * pc));
            CHECK(upper == lower);
            std::vector<double> s(n - 1, 1.0);
            for (std::size_t i = 0; i < d; ++i) s[i] = -1.0;
            CHECK(predicted_l2_exponent(n, pc.convert_to<double>(), Signature(s)) ==
                  doctest::Approx(upper.convert_to<double>()).epsilon(1e-12));
        }
}

TEST_CASE("xi and eta") {
    const auto a = xi_eta(3, 6);
    CHECK(a.xi == Q(1, 4));
    CHECK(a.eta == Q(1, 16));
    const auto b = xi_eta(2, 8);
    CHECK(b.xi == Q(1, 3));
    CHECK(b.eta == Q(1, 24));
    for (std::size_t n = 2; n <= 8; ++n)
        for (long long k = 1; k <= 20; ++k) CHECK(xi_eta(n, critical_index(n) + Q(k, 7)).xi < Q(1, 2));
    CHECK_THROWS_AS(xi_eta(3, 4), ContractError);
    CHECK_THROWS_AS(xi_eta(2, 5), ContractError);
}

TEST_CASE("psi recursion and closed form") {
    CHECK(psi_one(3, 6) == Q(1, 2) - Q(12, 24));
    const auto b = bootstrap_params(3, 6, 0);
    CHECK(psi_recursive_exact(b, 0) == b.psi1);
    CHECK(psi_closed_form_exact(b, 0) == b.psi1);
    CHECK(psi_recursive_exact(b, 1) == b.psi1 / 2 + (b.gamma / 2) * (1 - b.xi) + b.eta);
    CHECK(std::abs(psi_recursive(b, 10) - psi_closed_form(b, 10)) < 1e-12);
    for (std::size_t n : {2, 3, 5})
        for (const Rational& extra : {Q(1, 3), Q(2), Q(7)})
            for (const Rational& alpha : {Q(0), Q(1, 10), Q(1, 2)}) {
                const Rational p = critical_index(n) + extra;
                const auto c = bootstrap_params(n, p, working_gamma(n, p, alpha));
                for (std::size_t s = 0; s <= 60; s += 5) {
                    CHECK(std::abs(psi_recursive(c, s) - psi_closed_form(c, s)) < 1e-12);
                    if (s <= 20) CHECK(psi_recursive_exact(c, s) == psi_closed_form_exact(c, s));
                }
            }
}

TEST_CASE("bootstrap endgame") {
    // With eps small against 2^{-s0} the survivor alpha > 0 is contradicted.
    const auto c = bootstrap_consistency(3, 5, Q(1, 10), 40, Q(1, 1000000) / Rational(boost::multiprecision::cpp_int(1) << 40));
    CHECK(c.contradiction);
    CHECK_FALSE(bootstrap_consistency(3, 5, 0, 40, 0).contradiction);
    CHECK(bootstrap_consistency(3, 5, 0, 40, 0).lhs <= bootstrap_consistency(3, 5, 0, 40, 0).rhs);
    CHECK_FALSE(bootstrap_consistency(3, 5, Q(1, 100), 40, Q(1, 10)).contradiction);

    // The literal pair s0 = 40, eps = 1e-6 leaves 2^40 * 1e-6 ~ 1.1e6 on the right.
    const auto lit = bootstrap_consistency(3, 5, Q(1, 10), 40, Q(1, 1000000));
    CHECK_FALSE(lit.contradiction);
    CHECK(lit.rhs > 1e6);
    CHECK(lit.lhs == Q(1, 5) * (Q(2, 3) / Q(1, 3) - Q(1, 3) * Rational(pow(boost::multiprecision::cpp_int(2), 40), pow(boost::multiprecision::cpp_int(3), 40)) / Q(1, 3)));
    CHECK_THROWS_AS(bootstrap_consistency(3, 4, Q(1, 10), 10, 0), ContractError);
}

TEST_CASE("kappa and gamma bounds") {
    for (std::size_t n = 2; n <= 6; ++n) CHECK(kappa(n, static_cast<long long>(2 * n)) == 0);
    CHECK(kappa(2, 6) == Q(1, 2));
    CHECK(kappa(3, Exponent::infinity()) == 1);
    CHECK_THROWS_AS(kappa(2, 2), ContractError);
    for (std::size_t n = 2; n <= 10; ++n) {
        CHECK(gamma_bound(n, static_cast<long long>(4 * n - 2)) == 0);
        CHECK(gamma_bound(n, static_cast<long long>(2 * n + 1)) == 0);
    }
    CHECK(gamma_bound(2, 10) == Q(1, 6));
    CHECK(gamma_bound(3, 12) == Q(1, 18));
    CHECK(gamma_bound(3, Exponent::infinity()) == Q(1, 6));
    CHECK_THROWS_AS(gamma_bound(3, 6), ContractError);

    for (std::size_t n : {2, 3, 4})
        for (long long extra : {1, 4, 20}) {
            const Rational p = Q(static_cast<long long>(4 * n - 2 + extra));
            const double limit = gamma_bound(n, p).convert_to<double>();
            // 2(1 - kappa) is close to 1 just above 4n - 2, so convergence is slow there.
            const double deep = gamma_bound_at_depth(n, p, 600);
            CHECK(deep == doctest::Approx(limit).epsilon(1e-6));
            CHECK(gamma_bound_at_depth(n, p, 600, 1000) == doctest::Approx(limit).epsilon(1e-6));
            CHECK(std::abs(gamma_bound_at_depth(n, p, 60) - limit) >= std::abs(deep - limit));
        }
    CHECK_THROWS_AS(gamma_bound_at_depth(3, 10, 20), ContractError);
}

TEST_CASE("no-decoupling thresholds") {
    for (std::size_t n = 2; n <= 8; ++n) {
        const Rational nn = Q(static_cast<long long>(n));
        const auto one = no_decoupling_threshold(n, 1);
        CHECK(one.l == 1);
        CHECK(one.threshold == 2 * nn);
        const auto nat = no_decoupling_threshold(n, 1 / nn);
        CHECK(nat.l == n);
        CHECK(nat.threshold == nn * (nn + 1));
        const auto half = no_decoupling_threshold(n, Q(1, 2));
        CHECK(half.l == 2);
        CHECK(half.threshold == 4 * nn - 2);
        CHECK(no_decoupling_threshold(n, 1 / (2 * nn)).l == n);
    }
    CHECK(no_decoupling_threshold(5, Q(2, 5)).l == 2);
    CHECK_THROWS_AS(no_decoupling_threshold(3, 0), ContractError);
    CHECK_THROWS_AS(no_decoupling_threshold(3, Q(3, 2)), ContractError);
}

TEST_CASE("interpolation witness at small scales") {
    const auto I = transverse_intervals(3);
    REQUIRE(I.size() == 3);
    CHECK(I[0].lo == 0.0);
    CHECK(I[2].hi == 1.0);
    CHECK(I[1].lo - I[0].hi == doctest::Approx(0.2));

    const auto rep = interpolation_failure_witness(3, {1, 2, 4, 8, 16});
    REQUIRE(rep.rows.size() == 5);
    for (const auto& r : rep.rows) {
        CHECK(r.lhs > 0);
        CHECK(r.rhs > r.lhs);
        CHECK(r.relative_change < 5e-3);
    }
    CHECK(rep.lhs_fit.slope >= -0.38);
    CHECK(rep.rhs_fit.slope < rep.lhs_fit.slope);
    CHECK(rep.failure_margin < 0);
    CHECK_THROWS_AS(interpolation_failure_witness(3, {1, 2, 4, 8, 12}), ContractError);
    CHECK_THROWS_AS(interpolation_failure_witness(2, {1, 2, 4, 8, 16}), ContractError);
}
