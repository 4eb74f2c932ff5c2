#include "declab/numerology.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "declab/error.hpp"

namespace declab {

namespace {

using boost::multiprecision::cpp_int;

Rational R(long long a, long long b) { return Rational(a, b); }
Rational R(std::size_t a) { return Rational(static_cast<long long>(a)); }

Rational power(Rational base, std::size_t e) {
    Rational out = 1;
    while (e > 0) {
        if (e & 1) out *= base;
        base *= base;
        e >>= 1;
    }
    return out;
}

Rational two_to_minus(std::size_t s) {
    cpp_int d = 1;
    d <<= static_cast<unsigned>(s);
    return Rational(cpp_int(1), d);
}

double as_double(const Rational& r) { return r.convert_to<double>(); }

void need_n(std::size_t n, std::size_t lo, const char* where) {
    if (n < lo) {
        std::ostringstream msg;
        msg << where << ": n must be >= " << lo;
        throw ContractError(msg.str());
    }
}

}  // namespace

double Exponent::to_double() const { return infinite ? INFINITY : value.convert_to<double>(); }

Rational parse_rational(const std::string& text) {
    std::string t;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t.empty()) throw ContractError("parse_rational: empty text");
    const auto slash = t.find('/');
    if (slash != std::string::npos) {
        const Rational num = parse_rational(t.substr(0, slash));
        const Rational den = parse_rational(t.substr(slash + 1));
        if (den == 0) throw ContractError("parse_rational: zero denominator in '" + text + "'");
        return num / den;
    }
    std::size_t i = 0;
    bool negative = false;
    if (t[i] == '+' || t[i] == '-') negative = t[i++] == '-';
    cpp_int digits = 0;
    long long scale = 0;
    bool any = false, dot = false;
    for (; i < t.size() && t[i] != 'e' && t[i] != 'E'; ++i) {
        if (t[i] == '.' && !dot) {
            dot = true;
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(t[i]))) throw ContractError("parse_rational: bad number '" + text + "'");
        digits = digits * 10 + (t[i] - '0');
        any = true;
        if (dot) --scale;
    }
    if (!any) throw ContractError("parse_rational: bad number '" + text + "'");
    if (i < t.size()) {
        const std::string ex = t.substr(i + 1);
        if (ex.empty()) throw ContractError("parse_rational: bad exponent in '" + text + "'");
        std::size_t used = 0;
        long long e = 0;
        try {
            e = std::stoll(ex, &used);
        } catch (const std::exception&) {
            throw ContractError("parse_rational: bad exponent in '" + text + "'");
        }
        if (used != ex.size() || std::llabs(e) > 4000) throw ContractError("parse_rational: bad exponent in '" + text + "'");
        scale += e;
    }
    Rational out(digits);
    cpp_int ten = 1;
    for (long long k = 0; k < std::llabs(scale); ++k) ten *= 10;
    out = scale >= 0 ? out * Rational(ten) : out / Rational(ten);
    return negative ? -out : out;
}

Exponent parse_exponent(const std::string& text) {
    if (text == "inf" || text == "infinity" || text == "oo") return Exponent::infinity();
    return Exponent(parse_rational(text));
}

std::string to_string(const Rational& r) {
    std::ostringstream out;
    out << numerator(r);
    if (denominator(r) != 1) out << "/" << denominator(r);
    return out.str();
}

std::string to_string(const Exponent& e) { return e.infinite ? "inf" : to_string(e.value); }

Rational critical_index(std::size_t n) {
    need_n(n, 2, "critical_index");
    return 2 * R(n + 1) / R(n - 1);
}

Rational critical_index_signed(std::size_t n, std::size_t d) {
    need_n(n, 2, "critical_index_signed");
    if (d + 1 >= n) throw ContractError("critical_index_signed: need d < n - 1");
    return 2 * R(n + 1 - d) / R(n - 1 - d);
}

XiEta xi_eta(std::size_t n, const Rational& p) {
    if (!(p > critical_index(n)))
        throw ContractError("xi_eta: p must exceed the critical index 2(n+1)/(n-1), got " + to_string(p));
    const Rational nn = R(n);
    const Rational xi = 2 / ((p - 2) * (nn - 1));
    const Rational eta = nn * (nn * p - 2 * nn - p - 2) / (2 * p * (nn - 1) * (nn - 1) * (p - 2));
    if (!(xi < R(1, 2))) throw std::logic_error("xi_eta: xi < 1/2 violated");
    return {xi, eta};
}

Rational psi_one(std::size_t n, const Rational& p) {
    need_n(n, 2, "psi_one");
    const Rational nn = R(n);
    return (nn - 1) / 4 - (nn * nn + nn) / (2 * p * (nn - 1));
}

Rational working_gamma(std::size_t n, const Rational& p, const Rational& alpha) {
    need_n(n, 2, "working_gamma");
    const Rational nn = R(n);
    return (nn - 1) / 4 - (nn + 1) / (2 * p) + alpha;
}

BootstrapParams bootstrap_params(std::size_t n, const Rational& p, const Rational& gamma) {
    const XiEta xe = xi_eta(n, p);
    return {n, p, xe.xi, xe.eta, gamma, psi_one(n, p)};
}

Rational psi_recursive_exact(const BootstrapParams& b, std::size_t s) {
    Rational psi = b.psi1;
    Rational xs = 1;  // xi^j
    for (std::size_t j = 0; j < s; ++j) {
        const Rational next_x = xs * b.xi;
        psi = psi / 2 + (b.gamma / 2) * (1 - next_x) + b.eta * xs;
        xs = next_x;
    }
    return psi;
}

double psi_recursive(const BootstrapParams& b, std::size_t s) {
    double psi = as_double(b.psi1);
    const double xi = as_double(b.xi), gamma = as_double(b.gamma), eta = as_double(b.eta);
    double xs = 1;
    for (std::size_t j = 0; j < s; ++j) {
        const double next_x = xs * xi;
        psi = psi / 2 + (gamma / 2) * (1 - next_x) + eta * xs;
        xs = next_x;
    }
    return psi;
}

Rational psi_closed_form_exact(const BootstrapParams& b, std::size_t s) {
    const Rational h = two_to_minus(s);
    return h * b.psi1 + b.gamma * (1 - h) +
           2 * (b.eta / b.xi - b.gamma / 2) * (h - power(b.xi, s)) / (1 / b.xi - 2);
}

double psi_closed_form(const BootstrapParams& b, std::size_t s) {
    const double xi = as_double(b.xi), gamma = as_double(b.gamma), eta = as_double(b.eta);
    const double h = std::ldexp(1.0, -static_cast<int>(s));
    return h * as_double(b.psi1) + gamma * (1 - h) +
           2 * (eta / xi - gamma / 2) * (h - std::pow(xi, static_cast<double>(s))) / (1 / xi - 2);
}

BootstrapVerdict bootstrap_consistency(std::size_t n, const Rational& p, const Rational& alpha, std::size_t s0,
                                       const Rational& eps) {
    if (eps < 0) throw ContractError("bootstrap_consistency: eps must be >= 0");
    const BootstrapParams b = bootstrap_params(n, p, working_gamma(n, p, alpha));
    const Rational two_xi = 2 * b.xi;
    const Rational t = power(two_xi, s0);
    cpp_int big = 1;
    big <<= static_cast<unsigned>(s0);
    BootstrapVerdict v;
    v.lhs = b.gamma * ((1 - b.xi) / (1 - two_xi) - b.xi * t / (1 - two_xi));
    v.rhs = b.psi1 + Rational(big) * eps + (2 * b.eta / (1 - two_xi)) * (1 - t) + (R(n) / ((R(n) - 1) * p)) * t;
    v.contradiction = v.lhs > v.rhs;
    return v;
}

Rational kappa(std::size_t n, const Exponent& p) {
    need_n(n, 1, "kappa");
    if (p.infinite) return 1;
    if (!(p.value > 2)) throw ContractError("kappa: p must be > 2");
    return (p.value - 2 * R(n)) / (p.value - 2);
}

Rational gamma_bound(std::size_t n, const Exponent& p) {
    need_n(n, 1, "gamma_bound");
    const Rational nn = R(n);
    if (p.infinite) return 1 / (2 * nn);
    if (!(p.value > 2 * nn)) throw ContractError("gamma_bound: p must exceed 2n");
    if (p.value <= 4 * nn - 2) return 0;
    return (p.value - 4 * nn + 2) / (2 * nn * (p.value - 2 * nn));
}

double gamma_bound_at_depth(std::size_t n, const Rational& p, std::size_t s, double C) {
    need_n(n, 2, "gamma_bound_at_depth");
    if (!(p > 4 * R(n) - 2)) throw ContractError("gamma_bound_at_depth: p must exceed 4n - 2");
    std::size_t j0 = 0;
    while ((std::size_t{1} << j0) < n) ++j0;
    if (s < j0) throw ContractError("gamma_bound_at_depth: depth below j0");
    const double k = as_double(kappa(n, Exponent(p)));
    const double nd = static_cast<double>(n);
    const auto m = static_cast<double>(s - j0 + 1);
    const double two_s = std::ldexp(1.0, -static_cast<int>(s));
    // 1 - kappa A_s expanded, which avoids cancellation at large s.
    const double denom = std::pow(1 - k, m) + k * nd * two_s * (1 - std::pow(2 * (1 - k), m)) / (2 * k - 1);
    return (two_s / 2 + C * std::pow(1 - k, static_cast<double>(s))) / denom;
}

Threshold no_decoupling_threshold(std::size_t n, const Rational& alpha) {
    need_n(n, 1, "no_decoupling_threshold");
    if (!(alpha > 0 && alpha <= 1)) throw ContractError("no_decoupling_threshold: alpha must lie in (0, 1]");
    const Rational inv = 1 / alpha;
    const cpp_int fl = numerator(inv) / denominator(inv);
    const std::size_t l = fl >= n ? n : fl.convert_to<std::size_t>();
    const Rational lr = R(l);
    return {l, 2 * (R(n) - lr) / alpha + lr * (lr + 1)};
}

std::vector<Interval> transverse_intervals(std::size_t n) {
    need_n(n, 2, "transverse_intervals");
    const double w = 1.0 / static_cast<double>(2 * n - 1);
    std::vector<Interval> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({2 * static_cast<double>(i) * w, (2 * static_cast<double>(i) + 1) * w});
    out.back().hi = 1.0;
    return out;
}

namespace {

// Midpoint atoms of E_I 1 on the moment curve. The first coordinate drops the
// common offset lo + q/2, which only multiplies E_I 1 by a unimodular factor,
// so the set lies on the lattice qZ along axis 0.
FrequencySet extension_modulus_atoms(std::size_t n, Interval I, std::size_t nodes) {
    FrequencySet set(n);
    const double q = I.length() / static_cast<double>(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        const double t = I.lo + (static_cast<double>(j) + 0.5) * q;
        Vector xi(static_cast<Eigen::Index>(n));
        xi[0] = static_cast<double>(j) * q;
        double pw = t;
        for (std::size_t k = 1; k < n; ++k) xi[static_cast<Eigen::Index>(k)] = (pw *= t);
        set.add(std::move(xi), q);
    }
    std::vector<double> spacing(n, 0.0);
    spacing[0] = q;
    set.set_lattice(spacing);
    return set;
}

}  // namespace

WitnessReport interpolation_failure_witness(std::size_t n, const std::vector<std::size_t>& Ns, double h,
                                            const EvalOptions& options) {
    need_n(n, 3, "interpolation_failure_witness");
    if (Ns.size() < 5) throw ContractError("interpolation_failure_witness: need at least 5 scales");
    for (auto N : Ns)
        if (N < 1 || (N & (N - 1)) != 0) throw ContractError("interpolation_failure_witness: N must be dyadic");
    if (!(h > 0)) throw ContractError("interpolation_failure_witness: spacing must be > 0");

    WitnessReport rep;
    rep.n = n;
    rep.intervals = transverse_intervals(n);
    std::vector<std::pair<double, double>> lhs_series, rhs_series;
    for (auto N : Ns) {
        const double Nd = static_cast<double>(N);
        // Twice the phase rate n(n+1)N/2 across the cube; for n = 3 this also
        // keeps the axis-0 row transform within its plan budget.
        const double per_unit = static_cast<double>(n * (n + 1)) * Nd;
        std::vector<FrequencySet> sets;
        std::size_t total_nodes = 0;
        for (const auto& I : rep.intervals) {
            const auto k = std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(per_unit * I.length())));
            sets.push_back(extension_modulus_atoms(n, I, k));
            total_nodes += k;
        }
        const auto k_full = std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(per_unit)));
        sets.push_back(extension_modulus_atoms(n, {0.0, 1.0}, k_full));
        std::vector<const FrequencySet*> ptrs;
        for (const auto& s : sets) ptrs.push_back(&s);
        std::vector<NormRequest> req;
        NormRequest lhs{{}, static_cast<double>(3 * n), WeightKind::majorant, true};
        for (std::size_t i = 0; i < n; ++i) lhs.sets.push_back(i);
        req.push_back(lhs);
        req.push_back({{n}, 6.0, WeightKind::majorant, true});
        const double spacing = std::min(h, Nd / 8);
        const GridSpec grid = GridSpec::ball_with_spacing(Vector::Zero(static_cast<Eigen::Index>(n)), Nd, spacing);
        const auto r = refined_lp_norms(ptrs, grid, req, options, 5e-3, 3);
        rep.rows.push_back({N, r.values[0], r.values[1], total_nodes + k_full, r.max_relative_change});
        lhs_series.emplace_back(Nd, r.values[0]);
        rhs_series.emplace_back(Nd, r.values[1]);
    }
    rep.lhs_fit = fit_loglog(lhs_series);
    rep.rhs_fit = fit_loglog(rhs_series);
    rep.failure_margin = rep.lhs_fit.slope - (1.0 / (2 * static_cast<double>(n)) + rep.rhs_fit.slope);
    return rep;
}

}  // namespace declab
