#include "declab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "declab/error.hpp"
#include "declab/parallel.hpp"

namespace declab {

namespace {

using u128 = unsigned __int128;

struct Entry {
    std::uint64_t code;
    std::uint64_t count;
};

Count to_count(u128 v) {
    Count c = static_cast<std::uint64_t>(v >> 64);
    c <<= 64;
    c += static_cast<std::uint64_t>(v);
    return c;
}

std::size_t dimension_of(const std::vector<IntVector>& set) {
    if (set.empty()) throw ContractError("energy: empty set");
    const std::size_t n = set[0].size();
    for (const auto& v : set)
        if (v.size() != n) throw ContractError("energy: ragged points");
    return n;
}

void check_k(std::size_t k) {
    if (k < 1) throw ContractError("energy: k must be >= 1");
}

// Mixed-radix code of (v - min) over the box of k-fold sums. The code of a
// k-fold sum is the sum of the codes of its terms.
struct Encoder {
    std::vector<long long> lo;
    std::vector<u128> radix;
    std::vector<u128> width;
    u128 cells = 1;
    bool ok = true;

    Encoder(const std::vector<IntVector>& set, std::size_t k) {
        const std::size_t n = set[0].size();
        lo.assign(n, std::numeric_limits<long long>::max());
        std::vector<long long> hi(n, std::numeric_limits<long long>::min());
        for (const auto& v : set)
            for (std::size_t i = 0; i < n; ++i) {
                lo[i] = std::min(lo[i], v[i]);
                hi[i] = std::max(hi[i], v[i]);
            }
        for (std::size_t i = 0; i < n; ++i) {
            const u128 w = static_cast<u128>(static_cast<__int128>(hi[i]) - lo[i]) * k + 1;
            radix.push_back(cells);
            width.push_back(w);
            if (w > (u128{1} << 62) || cells > (u128{1} << 62) / w) {
                ok = false;
                return;
            }
            cells *= w;
        }
    }

    std::uint64_t code(const IntVector& v) const {
        u128 c = 0;
        for (std::size_t i = 0; i < v.size(); ++i) c += static_cast<u128>(v[i] - lo[i]) * radix[i];
        return static_cast<std::uint64_t>(c);
    }

    IntVector decode(std::uint64_t c, std::size_t k) const {
        IntVector v(lo.size());
        u128 rest = c;
        for (std::size_t i = 0; i < lo.size(); ++i) {
            v[i] = static_cast<long long>(rest % width[i]) + static_cast<long long>(k) * lo[i];
            rest /= width[i];
        }
        return v;
    }
};

std::vector<Entry> combine_sorted(std::vector<Entry> v) {
    std::sort(v.begin(), v.end(), [](const Entry& a, const Entry& b) { return a.code < b.code; });
    std::size_t w = 0;
    for (std::size_t r = 0; r < v.size(); ++r) {
        if (w > 0 && v[w - 1].code == v[r].code)
            v[w - 1].count += v[r].count;
        else
            v[w++] = v[r];
    }
    v.resize(w);
    return v;
}

std::vector<Entry> merge_sorted(const std::vector<Entry>& a, const std::vector<Entry>& b) {
    std::vector<Entry> out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].code < b[j].code)) {
            out.push_back(a[i++]);
        } else if (i == a.size() || b[j].code < a[i].code) {
            out.push_back(b[j++]);
        } else {
            out.push_back({a[i].code, a[i].count + b[j].count});
            ++i;
            ++j;
        }
    }
    return out;
}

void check_count_range(std::size_t size, std::size_t k) {
    const double total = std::pow(static_cast<double>(size), static_cast<double>(k));
    if (total >= 9.2e18) throw GuardError("energy_hashed: |set|^k overflows the multiplicity type");
}

// Sorted (code, multiplicity) table of the k-fold ordered sums.
std::vector<Entry> sum_table(const std::vector<IntVector>& set, std::size_t k, const Encoder& enc,
                             const EnergyOptions& options) {
    check_count_range(set.size(), k);
    std::vector<std::uint64_t> codes;
    for (const auto& v : set) codes.push_back(enc.code(v));
    std::vector<Entry> level;
    for (auto c : codes) level.push_back({c, 1});
    level = combine_sorted(std::move(level));
    const std::vector<Entry> base = level;
    const std::size_t workers = options.workers == 0 ? default_workers() : options.workers;
    for (std::size_t step = 1; step < k; ++step) {
        if (static_cast<double>(level.size()) * static_cast<double>(base.size()) > static_cast<double>(options.max_entries)) {
            std::ostringstream msg;
            msg << "energy_hashed: " << level.size() << " x " << base.size()
                << " partial sums exceed the entry budget " << options.max_entries;
            throw GuardError(msg.str());
        }
        // Shard over the base atoms; each shard is sorted on its own, then merged in shard order.
        const std::size_t shards = std::min(workers, base.size());
        std::vector<std::vector<Entry>> parts(shards);
        parallel_for(shards, workers, [&](std::size_t s) {
            const std::size_t a = base.size() * s / shards, b = base.size() * (s + 1) / shards;
            std::vector<Entry> part;
            part.reserve(level.size() * (b - a));
            for (std::size_t j = a; j < b; ++j)
                for (const auto& e : level) part.push_back({e.code + base[j].code, e.count * base[j].count});
            parts[s] = combine_sorted(std::move(part));
        });
        std::vector<Entry> next = std::move(parts[0]);
        for (std::size_t s = 1; s < shards; ++s) next = merge_sorted(next, parts[s]);
        level = std::move(next);
    }
    return level;
}

// Same table with explicit vector keys, for sets whose sum box does not fit a 64-bit code.
std::map<IntVector, std::uint64_t> sum_map(const std::vector<IntVector>& set, std::size_t k,
                                           const EnergyOptions& options) {
    check_count_range(set.size(), k);
    std::map<IntVector, std::uint64_t> base;
    for (const auto& v : set) base[v] += 1;
    auto level = base;
    for (std::size_t step = 1; step < k; ++step) {
        if (static_cast<double>(level.size()) * static_cast<double>(base.size()) > static_cast<double>(options.max_entries))
            throw GuardError("energy_hashed: partial sums exceed the entry budget");
        std::map<IntVector, std::uint64_t> next;
        for (const auto& [s, m] : level)
            for (const auto& [v, c] : base) {
                IntVector t(s.size());
                for (std::size_t i = 0; i < s.size(); ++i) {
                    const __int128 x = static_cast<__int128>(s[i]) + v[i];
                    if (x > std::numeric_limits<long long>::max() || x < std::numeric_limits<long long>::min())
                        throw GuardError("energy_hashed: coordinate overflow");
                    t[i] = static_cast<long long>(x);
                }
                next[t] += m * c;
            }
        level = std::move(next);
    }
    return level;
}

// Distinct k-fold sums with their multiplicities.
std::vector<std::pair<IntVector, std::uint64_t>> sum_keys(const std::vector<IntVector>& set, std::size_t k,
                                                          const EnergyOptions& options) {
    std::vector<std::pair<IntVector, std::uint64_t>> out;
    const Encoder enc(set, k);
    if (enc.ok) {
        for (const auto& e : sum_table(set, k, enc, options)) out.emplace_back(enc.decode(e.code, k), e.count);
    } else {
        for (const auto& [key, m] : sum_map(set, k, options)) out.emplace_back(key, m);
    }
    return out;
}

Count sum_of_squares(const std::vector<std::uint64_t>& m) {
    Count total = 0;
    u128 acc = 0;
    for (auto v : m) {
        const u128 sq = static_cast<u128>(v) * v;
        if (acc > ~u128{0} - sq) {
            total += to_count(acc);
            acc = 0;
        }
        acc += sq;
    }
    return total + to_count(acc);
}

}  // namespace

Count energy_bruteforce(const std::vector<IntVector>& set, std::size_t k, double guard) {
    const std::size_t n = dimension_of(set);
    check_k(k);
    const double tuples = std::pow(static_cast<double>(set.size()), 2.0 * static_cast<double>(k));
    if (tuples > guard) {
        std::ostringstream msg;
        msg << "energy_bruteforce: " << tuples << " tuples exceed the oracle guard " << guard
            << "; use energy_hashed";
        throw GuardError(msg.str());
    }
    std::vector<long long> partial(n * (2 * k + 1), 0);
    std::uint64_t count = 0;
    std::function<void(std::size_t)> walk = [&](std::size_t depth) {
        const long long* cur = &partial[depth * n];
        if (depth == 2 * k) {
            for (std::size_t i = 0; i < n; ++i)
                if (cur[i] != 0) return;
            ++count;
            return;
        }
        long long* nxt = &partial[(depth + 1) * n];
        const long long sign = depth < k ? 1 : -1;
        for (const auto& v : set) {
            for (std::size_t i = 0; i < n; ++i) nxt[i] = cur[i] + sign * v[i];
            walk(depth + 1);
        }
    };
    walk(0);
    return Count(count);
}

Count energy_bruteforce(const std::vector<Vector>& set, std::size_t k, double tolerance, double guard) {
    if (set.empty()) throw ContractError("energy: empty set");
    check_k(k);
    const auto n = static_cast<std::size_t>(set[0].size());
    const double tuples = std::pow(static_cast<double>(set.size()), 2.0 * static_cast<double>(k));
    if (tuples > guard) throw GuardError("energy_bruteforce: tuple count exceeds the oracle guard; use energy_hashed");
    std::vector<Vector> partial(2 * k + 1, Vector::Zero(static_cast<Eigen::Index>(n)));
    std::uint64_t count = 0;
    std::function<void(std::size_t)> walk = [&](std::size_t depth) {
        if (depth == 2 * k) {
            if (partial[depth].cwiseAbs().maxCoeff() <= tolerance) ++count;
            return;
        }
        const double sign = depth < k ? 1 : -1;
        for (const auto& v : set) {
            partial[depth + 1] = partial[depth] + sign * v;
            walk(depth + 1);
        }
    };
    walk(0);
    return Count(count);
}

EnergyResult energy_hashed(const std::vector<IntVector>& set, std::size_t k, const EnergyOptions& options) {
    dimension_of(set);
    check_k(k);
    std::vector<std::uint64_t> m;
    const Encoder enc(set, k);
    if (enc.ok) {
        for (const auto& e : sum_table(set, k, enc, options)) m.push_back(e.count);
    } else {
        for (const auto& [key, c] : sum_map(set, k, options)) m.push_back(c);
    }
    return {sum_of_squares(m), m.size(), 0.0};
}

EnergyResult energy_hashed(const std::vector<Vector>& set, std::size_t k, double scale, const EnergyOptions& options) {
    if (set.empty()) throw ContractError("energy: empty set");
    check_k(k);
    const auto n = static_cast<std::size_t>(set[0].size());
    if (scale <= 0) {
        double gap = INFINITY;
        for (std::size_t i = 0; i < set.size(); ++i)
            for (std::size_t j = i + 1; j < set.size(); ++j) {
                const double d = (set[i] - set[j]).norm();
                if (d > 0) gap = std::min(gap, d);
            }
        scale = std::isinf(gap) ? 1.0 : gap / 100;
    }
    std::vector<IntVector> q;
    for (const auto& v : set) {
        if (static_cast<std::size_t>(v.size()) != n) throw ContractError("energy: ragged points");
        IntVector c(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = v[static_cast<Eigen::Index>(i)] / scale;
            if (!(std::abs(x) < 4e15)) throw GuardError("energy_hashed: quantized coordinate out of range");
            c[i] = std::llround(x);
        }
        q.push_back(std::move(c));
    }
    const auto keys = sum_keys(q, k, options);

    // Equal real sums land within k steps per coordinate; join such keys.
    struct VecHash {
        std::size_t operator()(const IntVector& v) const {
            std::size_t h = 1469598103934665603ull;
            for (long long x : v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
            return h;
        }
    };
    std::unordered_map<IntVector, std::size_t, VecHash> index;
    for (std::size_t i = 0; i < keys.size(); ++i) index.emplace(keys[i].first, i);
    std::vector<std::size_t> parent(keys.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    const auto reach = static_cast<long long>(k);
    const double offsets = std::pow(2.0 * static_cast<double>(k) + 1, static_cast<double>(n));
    if (offsets * static_cast<double>(keys.size()) > 4e9) throw GuardError("energy_hashed: neighbour audit too large");
    IntVector offset(n, -reach);
    while (true) {
        if (std::any_of(offset.begin(), offset.end(), [](long long x) { return x != 0; })) {
            for (std::size_t i = 0; i < keys.size(); ++i) {
                IntVector probe = keys[i].first;
                for (std::size_t a = 0; a < n; ++a) probe[a] += offset[a];
                const auto it = index.find(probe);
                if (it != index.end()) parent[find(i)] = find(it->second);
            }
        }
        std::size_t a = 0;
        while (a < n && ++offset[a] > reach) offset[a++] = -reach;
        if (a == n) break;
    }

    std::map<std::size_t, std::pair<IntVector, IntVector>> box;  // root -> (min key, max key) per coordinate
    std::map<std::size_t, std::uint64_t> mass;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::size_t r = find(i);
        mass[r] += keys[i].second;
        auto it = box.find(r);
        if (it == box.end()) {
            box.emplace(r, std::make_pair(keys[i].first, keys[i].first));
            continue;
        }
        for (std::size_t a = 0; a < n; ++a) {
            it->second.first[a] = std::min(it->second.first[a], keys[i].first[a]);
            it->second.second[a] = std::max(it->second.second[a], keys[i].first[a]);
        }
    }
    for (const auto& [r, b] : box)
        for (std::size_t a = 0; a < n; ++a)
            if (b.second[a] - b.first[a] > reach) {
                std::ostringstream msg;
                msg << "energy_hashed: ambiguous quantization at scale " << scale << ": keys along axis " << a
                    << " span " << b.first[a] << " .. " << b.second[a] << " steps";
                throw CollisionError(msg.str());
            }
    std::vector<std::uint64_t> m;
    for (const auto& [r, v] : mass) m.push_back(v);
    return {sum_of_squares(m), m.size(), scale};
}

Count moment_integral_torus(const std::vector<IntVector>& set, std::size_t k, std::size_t max_cells) {
    dimension_of(set);
    check_k(k);
    const Encoder enc(set, k);
    if (!enc.ok || enc.cells > max_cells) {
        std::ostringstream msg;
        msg << "moment_integral_torus: the dense box of " << k << "-fold sums exceeds " << max_cells << " cells";
        throw GuardError(msg.str());
    }
    const auto cells = static_cast<std::size_t>(enc.cells);
    std::vector<std::uint64_t> codes;
    for (const auto& v : set) codes.push_back(enc.code(v));

    const double peak = std::pow(static_cast<double>(set.size()), static_cast<double>(k));
    if (peak < 9e18) {
        std::vector<std::uint64_t> cur(cells, 0), next(cells, 0);
        for (auto c : codes) cur[c] += 1;
        for (std::size_t step = 1; step < k; ++step) {
            std::fill(next.begin(), next.end(), 0);
            for (std::size_t i = 0; i < cells; ++i) {
                if (cur[i] == 0) continue;
                for (auto c : codes) next[i + c] += cur[i];
            }
            std::swap(cur, next);
        }
        std::vector<std::uint64_t> nz;
        for (auto v : cur)
            if (v != 0) nz.push_back(v);
        return sum_of_squares(nz);
    }
    std::vector<Count> cur(cells), next(cells);
    for (auto c : codes) cur[c] += 1;
    for (std::size_t step = 1; step < k; ++step) {
        for (auto& v : next) v = 0;
        for (std::size_t i = 0; i < cells; ++i) {
            if (cur[i] == 0) continue;
            for (auto c : codes) next[i + c] += cur[i];
        }
        std::swap(cur, next);
    }
    Count total = 0;
    for (const auto& v : cur) total += v * v;
    return total;
}

std::vector<IntVector> moment_curve_points(std::size_t N, std::size_t n) {
    if (N < 1 || n < 1) throw ContractError("moment_curve_points: N and n must be >= 1");
    std::vector<IntVector> out;
    for (std::size_t l = 1; l <= N; ++l) {
        IntVector v(n);
        __int128 p = 1;
        for (std::size_t j = 0; j < n; ++j) {
            p *= static_cast<__int128>(l);
            if (p > std::numeric_limits<long long>::max()) throw GuardError("moment_curve_points: power overflow");
            v[j] = static_cast<long long>(p);
        }
        out.push_back(std::move(v));
    }
    return out;
}

EnergyResult vinogradov_energy(std::size_t N, std::size_t n, std::size_t k, const EnergyOptions& options) {
    return energy_hashed(moment_curve_points(N, n), k, options);
}

}  // namespace declab
