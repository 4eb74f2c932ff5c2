#include "declab/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "declab/decoupling.hpp"
#include "declab/error.hpp"
#include "declab/parallel.hpp"

namespace declab {

TorusSpec::TorusSpec(Signature sig, std::size_t cutoff) : s(std::move(sig)), N(cutoff) {
    if (N < 1) throw ContractError("TorusSpec: N must be >= 1");
}

void Modes::add(IntVector freq, Complex a) {
    if (!k.empty() && freq.size() != k[0].size()) throw ContractError("Modes: dimension mismatch");
    k.push_back(std::move(freq));
    c.push_back(a);
}

double Modes::l2() const {
    double s = 0;
    for (const auto& a : c) s += std::norm(a);
    return std::sqrt(s);
}

double phase_symbol(const Signature& s, const IntVector& k) {
    if (k.size() != s.base_dim()) throw ContractError("phase_symbol: dimension mismatch");
    double w = 0;
    for (std::size_t i = 0; i < k.size(); ++i) w += s[i] * static_cast<double>(k[i]) * static_cast<double>(k[i]);
    return w;
}

GridSpec torus_grid(std::size_t dim, std::size_t samples) {
    return GridSpec::cell(Vector::Constant(static_cast<Eigen::Index>(dim), 0.5), std::vector<double>(dim, 1.0),
                          std::vector<std::size_t>(dim, samples));
}

namespace {

void check_support(const TorusSpec& spec, const Modes& phi) {
    if (phi.size() == 0) throw ContractError("evolution: no modes");
    const auto N = static_cast<long long>(spec.N);
    for (const auto& k : phi.k) {
        if (k.size() != spec.s.base_dim()) throw ContractError("evolution: mode dimension mismatch");
        for (long long v : k)
            if (v < -N || v > N) {
                std::ostringstream msg;
                msg << "evolution: mode component " << v << " outside the cutoff [-" << N << ", " << N << "]";
                throw ContractError(msg.str());
            }
    }
}

FrequencySet phased(const TorusSpec& spec, const Modes& phi, double t) {
    FrequencySet set(spec.s.base_dim());
    for (std::size_t j = 0; j < phi.size(); ++j) {
        Vector xi(static_cast<Eigen::Index>(phi.k[j].size()));
        for (std::size_t i = 0; i < phi.k[j].size(); ++i) xi[static_cast<Eigen::Index>(i)] = static_cast<double>(phi.k[j][i]);
        set.add(std::move(xi), phi.c[j] * unit_phase(t * phase_symbol(spec.s, phi.k[j])));
    }
    set.set_lattice(1.0);
    return set;
}

bool is_integer(double v) { return std::isfinite(v) && v == std::round(v); }

bool is_even(double p) { return !std::isinf(p) && std::abs(p / 2 - std::round(p / 2)) == 0; }

// int_I int_T |F|^p by midpoint slices (max |F| when p is infinite).
double slice_integral(const TorusSpec& spec, const Modes& phi, double p, Interval I, std::size_t slices,
                      std::size_t space, const EvalOptions& eval) {
    const GridSpec grid = torus_grid(spec.s.base_dim(), space);
    const double dt = I.length() / static_cast<double>(slices);
    std::vector<double> part(slices, 0.0);
    EvalOptions inner = eval;
    inner.workers = 1;
    const std::vector<NormRequest> req{{{0}, p, WeightKind::none, false}};
    parallel_for(slices, eval.workers == 0 ? default_workers() : eval.workers, [&](std::size_t j) {
        const double t = I.lo + (static_cast<double>(j) + 0.5) * dt;
        const FrequencySet set = phased(spec, phi, t);
        const double v = stream_lp_norms({&set}, grid, req, inner)[0];
        part[j] = std::isinf(p) ? v : std::pow(v, p) * dt;
    });
    if (std::isinf(p)) return *std::max_element(part.begin(), part.end());
    return std::accumulate(part.begin(), part.end(), 0.0);
}

}  // namespace

Field evolve(const TorusSpec& spec, const Modes& phi, double t, const GridSpec& grid, const EvalOptions& options) {
    check_support(spec, phi);
    if (grid.n() != spec.s.base_dim()) throw ContractError("evolve: grid dimension mismatch");
    return eval_exp_sum(phased(spec, phi, t), grid, options);
}

StrichartzResult strichartz_norm(const TorusSpec& spec, const Modes& phi, double p, Interval I,
                                 const StrichartzOptions& options) {
    check_support(spec, phi);
    if (!(p >= 1)) throw ContractError("strichartz_norm: p must be >= 1");
    if (!(I.length() >= 1)) throw ContractError("strichartz_norm: the time interval must have length >= 1");
    const std::size_t n = spec.s.n();

    StrichartzResult out;
    out.phi_l2 = phi.l2();
    try {
        out.predicted_exponent = predicted_strichartz_exponent(n, p, spec.s);
    } catch (const UnsupportedError&) {
        out.predicted_exponent = NAN;
    } catch (const ContractError&) {
        out.predicted_exponent = NAN;
    }
    const double inv_p = std::isinf(p) ? 0.0 : 1 / p;

    const bool integral = std::all_of(spec.s.entries().begin(), spec.s.entries().end(), is_integer);
    if (options.allow_torus_path && integral && is_integer(I.length())) {
        // Phases are integral, so the time integral covers whole periods of the
        // n-dimensional torus sum in (x, t).
        std::vector<IntVector> freq;
        for (const auto& k : phi.k) {
            IntVector f = k;
            f.push_back(std::llround(phase_symbol(spec.s, k)));
            freq.push_back(std::move(f));
        }
        const TorusNorm tn = torus_lp_norm(freq, phi.c, p, options.eval);
        out.norm = tn.value * std::pow(I.length(), inv_p);
        out.torus_path = true;
        out.exact = tn.exact;
        out.space_samples = tn.samples.empty() ? 0 : tn.samples[0];
        out.ratio = out.norm / out.phi_l2;
        return out;
    }

    double weight = 0;
    for (double v : spec.s.entries()) weight += std::abs(v);
    const double Nd = static_cast<double>(spec.N);
    std::size_t per_unit = options.time_per_unit;
    if (per_unit == 0) per_unit = static_cast<std::size_t>(std::ceil(4 * Nd * Nd * std::max(1.0, weight)));
    std::size_t slices = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(per_unit * I.length())));
    std::size_t space = options.space_samples;
    const double pn = std::isinf(p) ? 8 * Nd : p * Nd;
    if (space == 0) space = static_cast<std::size_t>(std::max(4 * Nd + 1, std::ceil(pn) + 1));
    const bool even = is_even(p);

    double prev = slice_integral(spec, phi, p, I, slices, space, options.eval);
    for (std::size_t d = 1; d <= options.max_doublings; ++d) {
        slices *= 2;
        if (!even) space *= 2;
        const double cur = slice_integral(spec, phi, p, I, slices, space, options.eval);
        const double a = std::isinf(p) ? prev : std::pow(prev, inv_p);
        const double b = std::isinf(p) ? cur : std::pow(cur, inv_p);
        const double change = std::abs(b - a) / std::max(std::abs(b), 1e-300);
        prev = cur;
        if (change < options.tolerance) {
            out.norm = b;
            out.time_slices = slices;
            out.space_samples = space;
            out.relative_change = change;
            out.ratio = out.norm / out.phi_l2;
            return out;
        }
    }
    std::ostringstream msg;
    msg << "strichartz_norm: quadrature did not settle within " << options.max_doublings << " doublings";
    throw ConvergenceError(msg.str());
}

Modes subspace_initial_data(const TorusSpec& spec) {
    const std::size_t d = signature_d(spec.s);
    if (d == 0) throw UnsupportedError("subspace_initial_data: elliptic signature (d = 0) has no null subspace");
    const auto pairs = null_pairs(spec.s);
    if (pairs.size() < d)
        throw UnsupportedError("subspace_initial_data: entries are not matched +/- pairs; the null-subspace "
                               "example does not exist for rationally independent entries");
    const auto N = static_cast<long long>(spec.N);
    const auto side = static_cast<std::size_t>(2 * N + 1);
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= side;
    Modes out;
    for (std::size_t flat = 0; flat < total; ++flat) {
        IntVector k(spec.s.base_dim(), 0);
        std::size_t rest = flat;
        for (std::size_t l = 0; l < d; ++l) {
            const long long v = static_cast<long long>(rest % side) - N;
            rest /= side;
            k[pairs[l].first] = v;
            k[pairs[l].second] = v;
        }
        out.add(std::move(k), 1.0);
    }
    return out;
}

double predicted_strichartz_exponent(std::size_t n, double p, const Signature& s) {
    return -2 * predicted_l2_exponent(n, p, s);
}

}  // namespace declab
