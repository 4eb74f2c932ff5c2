#include "declab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "declab/error.hpp"

namespace declab {

namespace {

long long checked(__int128 v) {
    if (v > std::numeric_limits<long long>::max() || v < std::numeric_limits<long long>::min())
        throw GuardError("integer lattice: entry overflow");
    return static_cast<long long>(v);
}

// g = gcd(a, b) = s a + t b.
void ext_gcd(long long a, long long b, long long& g, long long& s, long long& t) {
    long long r0 = a, r1 = b, s0 = 1, s1 = 0, t0 = 0, t1 = 1;
    while (r1 != 0) {
        const long long q = r0 / r1;
        std::tie(r0, r1) = std::make_pair(r1, r0 - q * r1);
        std::tie(s0, s1) = std::make_pair(s1, s0 - q * s1);
        std::tie(t0, t1) = std::make_pair(t1, t0 - q * t1);
    }
    if (r0 < 0) {
        r0 = -r0;
        s0 = -s0;
        t0 = -t0;
    }
    g = r0;
    s = s0;
    t = t0;
}

IntVector combine(long long a, const IntVector& x, long long b, const IntVector& y) {
    IntVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = checked(static_cast<__int128>(a) * x[i] + static_cast<__int128>(b) * y[i]);
    return out;
}

long long floor_div(long long a, long long b) {
    long long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

void IntegerLattice::insert(IntVector v) {
    if (v.size() != dim_) throw ContractError("IntegerLattice: dimension mismatch");
    for (std::size_t i = 0;; ++i) {
        const auto lead_it = std::find_if(v.begin(), v.end(), [](long long x) { return x != 0; });
        if (lead_it == v.end()) break;
        const auto lead = static_cast<std::size_t>(lead_it - v.begin());
        if (i == basis_.size() || lead < pivots_[i]) {
            // Rows from i on vanish in column `lead`, so echelon order survives.
            basis_.insert(basis_.begin() + static_cast<std::ptrdiff_t>(i), std::move(v));
            pivots_.insert(pivots_.begin() + static_cast<std::ptrdiff_t>(i), lead);
            break;
        }
        const std::size_t c = pivots_[i];
        if (lead > c) continue;
        long long g, s, t;
        ext_gcd(basis_[i][c], v[c], g, s, t);
        const long long bc = basis_[i][c] / g, vc = v[c] / g;
        IntVector row = combine(s, basis_[i], t, v);
        v = combine(bc, v, -vc, basis_[i]);
        basis_[i] = std::move(row);
    }
    normalize();
}

void IntegerLattice::normalize() {
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        if (basis_[i][pivots_[i]] < 0)
            for (auto& x : basis_[i]) x = -x;
    }
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        const std::size_t c = pivots_[i];
        for (std::size_t l = 0; l < i; ++l) {
            const long long q = floor_div(basis_[l][c], basis_[i][c]);
            if (q != 0) basis_[l] = combine(1, basis_[l], -q, basis_[i]);
        }
    }
}

IntVector IntegerLattice::coordinates(const IntVector& v) const {
    if (v.size() != dim_) throw ContractError("IntegerLattice: dimension mismatch");
    IntVector rest = v;
    IntVector m(basis_.size(), 0);
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        const std::size_t c = pivots_[i];
        for (std::size_t col = 0; col < c; ++col)
            if (rest[col] != 0) throw DomainError("IntegerLattice: vector outside the lattice");
        if (rest[c] % basis_[i][c] != 0) throw DomainError("IntegerLattice: vector outside the lattice");
        m[i] = rest[c] / basis_[i][c];
        rest = combine(1, rest, -m[i], basis_[i]);
    }
    for (long long x : rest)
        if (x != 0) throw DomainError("IntegerLattice: vector outside the lattice");
    return m;
}

IntegerLattice lattice_span(const std::vector<IntVector>& vectors, std::size_t dim) {
    IntegerLattice lat(dim);
    for (const auto& v : vectors) {
        bool zero = std::all_of(v.begin(), v.end(), [](long long x) { return x == 0; });
        if (!zero) lat.insert(v);
    }
    return lat;
}

TorusNorm torus_lp_norm(const std::vector<IntVector>& freq, const std::vector<Complex>& coef, double p,
                        const EvalOptions& options) {
    if (freq.size() != coef.size()) throw ContractError("torus_lp_norm: frequency/coefficient count mismatch");
    if (freq.empty()) throw ContractError("torus_lp_norm: no frequencies");
    if (!(p >= 1)) throw ContractError("torus_lp_norm: p must be >= 1");
    const std::size_t dim = freq[0].size();

    // Merge repeated frequencies first so the reduced sum has distinct atoms.
    std::map<IntVector, Complex> merged;
    for (std::size_t j = 0; j < freq.size(); ++j) {
        if (freq[j].size() != dim) throw ContractError("torus_lp_norm: ragged frequencies");
        merged[freq[j]] += coef[j];
    }
    std::vector<IntVector> keys;
    for (const auto& [k, c] : merged) keys.push_back(k);
    const IntegerLattice lat = lattice_span(keys, dim);
    const std::size_t r = lat.rank();

    if (r == 0) {
        const double mod = std::abs(merged.begin()->second);
        return {mod, 0, {}, true};
    }

    FrequencySet set(r);
    for (const auto& [k, c] : merged) {
        const IntVector m = lat.coordinates(k);
        Vector xi(static_cast<Eigen::Index>(r));
        for (std::size_t i = 0; i < r; ++i) xi[static_cast<Eigen::Index>(i)] = static_cast<double>(m[i]);
        set.add(std::move(xi), c);
    }
    set.set_lattice(1.0);

    const bool even = !std::isinf(p) && std::abs(p / 2 - std::round(p / 2)) == 0;
    std::vector<std::size_t> samples(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double spread = set.spread(i);
        samples[i] = even ? exact_cell_samples(spread, 1.0, p)
                          : std::max<std::size_t>(4, static_cast<std::size_t>(2 * spread) + 2);
    }
    const GridSpec cell = GridSpec::cell(Vector::Constant(static_cast<Eigen::Index>(r), 0.5),
                                         std::vector<double>(r, 1.0), samples);
    const std::vector<NormRequest> req{{{0}, p, WeightKind::none, false}};
    if (even) {
        const double v = stream_lp_norms({&set}, cell, req, options)[0];
        return {v, r, samples, true};
    }
    const auto refined = refined_lp_norms({&set}, cell, req, options);
    return {refined.values[0], r, refined.grid.samples(), false};
}

}  // namespace declab
