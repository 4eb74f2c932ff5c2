#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "declab/decoupling.hpp"

namespace declab {

using Rational = boost::multiprecision::cpp_rational;

/// Exact p, or p = infinity.
struct Exponent {
    Rational value = 0;
    bool infinite = false;

    Exponent() = default;
    Exponent(Rational v) : value(std::move(v)) {}
    Exponent(long long v) : value(v) {}          
    static Exponent infinity() {
        Exponent e;
        e.infinite = true;
        return e;
    }
    double to_double() const;
};

/// Parses "6", "13/2", "2.5", "1e-8" or "inf".
Exponent parse_exponent(const std::string& text);
Rational parse_rational(const std::string& text);
std::string to_string(const Rational& r);
std::string to_string(const Exponent& e);

/// 2(n+1)/(n-1).
Rational critical_index(std::size_t n);
/// 2(n+1-d)/(n-1-d); d < n - 1.
Rational critical_index_signed(std::size_t n, std::size_t d);

struct XiEta {
    Rational xi;
    Rational eta;
};
/// xi = 2/((p-2)(n-1)), eta = n(np-2n-p-2)/(2p(n-1)^2(p-2)) for p above critical_index(n).
XiEta xi_eta(std::size_t n, const Rational& p);

/// (n-1)/4 - (n^2+n)/(2p(n-1)).
Rational psi_one(std::size_t n, const Rational& p);
/// (n-1)/4 - (n+1)/(2p) + alpha.
Rational working_gamma(std::size_t n, const Rational& p, const Rational& alpha);

struct BootstrapParams {
    std::size_t n = 0;
    Rational p;
    Rational xi;
    Rational eta;
    Rational gamma;
    Rational psi1;  ///< psi(1)
};
BootstrapParams bootstrap_params(std::size_t n, const Rational& p, const Rational& gamma);

/// psi(xi^s) from the recursion psi(xi^{s+1}) = psi(xi^s)/2 + (gamma/2)(1 - xi^{s+1}) + eta xi^s.
Rational psi_recursive_exact(const BootstrapParams& b, std::size_t s);
double psi_recursive(const BootstrapParams& b, std::size_t s);
/// 2^{-s} psi(1) + gamma(1 - 2^{-s}) + 2(eta/xi - gamma/2)(2^{-s} - xi^s)/(1/xi - 2).
Rational psi_closed_form_exact(const BootstrapParams& b, std::size_t s);
double psi_closed_form(const BootstrapParams& b, std::size_t s);

struct BootstrapVerdict {
    bool contradiction = false;  ///< lhs > rhs strictly
    Rational lhs;
    Rational rhs;
};
/// Compares gamma((1-xi)/(1-2xi) - xi(2xi)^{s0}/(1-2xi)) with
/// psi(1) + 2^{s0} eps + (2 eta/(1-2xi))(1-(2xi)^{s0}) + (n/((n-1)p))(2xi)^{s0}.
BootstrapVerdict bootstrap_consistency(std::size_t n, const Rational& p, const Rational& alpha, std::size_t s0,
                                       const Rational& eps);

/// (p - 2n)/(p - 2); the limit 1 at p = infinity.
Rational kappa(std::size_t n, const Exponent& p);
/// (p-4n+2)/(2n(p-2n)) for p > 4n-2, and 0 on (2n, 4n-2]; 1/(2n) at infinity.
Rational gamma_bound(std::size_t n, const Exponent& p);
/// (2^{-s-1} + C(1-kappa)^s) / (1 - kappa A_s) with
/// A_s = (1-(1-kappa)^{s-j0+1})/kappa - n 2^{-s} (1-(2(1-kappa))^{s-j0+1})/(2 kappa - 1),
/// where 2^{-j0} <= 1/n < 2^{-j0+1}. Needs p > 4n-2 and s >= j0. Tends to gamma_bound as s grows.
double gamma_bound_at_depth(std::size_t n, const Rational& p, std::size_t s, double C = 10);

struct Threshold {
    std::size_t l;
    Rational threshold;  ///< 2(n-l)/alpha + l(l+1)
};
/// l(alpha) with 1/(l+1) < alpha <= 1/l, capped at n.
Threshold no_decoupling_threshold(std::size_t n, const Rational& alpha);

struct WitnessRow {
    std::size_t N;
    double lhs;  ///< ||(prod_i |E_{I_i} 1|)^{1/n}||_{L^{3n}_#(B_N)}
    double rhs;  ///< ||E_{[0,1]} 1||_{L^6_#(B_N)}
    std::size_t nodes;
    double relative_change;
};
struct WitnessReport {
    std::size_t n;
    std::vector<Interval> intervals;
    std::vector<WitnessRow> rows;
    ExponentFit lhs_fit;
    ExponentFit rhs_fit;
    /// lhs slope - (1/(2n) + rhs slope). The interpolated inequality, with
    /// ||E_U 1|| bounded by ||E_{[0,1]} 1|| over the N^{1/n}-many arcs U, fails
    /// at these scales when this is positive.
    double failure_margin = 0;
};
/// n transverse intervals of [0, 1] (equal gaps between them).
std::vector<Interval> transverse_intervals(std::size_t n);
/// Normalized L^p norms over the N-ball (majorant weight, cube grid of spacing h).
WitnessReport interpolation_failure_witness(std::size_t n, const std::vector<std::size_t>& Ns, double h = 0.5,
                                            const EvalOptions& options = {});

}  // namespace declab
