#include "declab/decoupling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "declab/error.hpp"

namespace declab {

std::string outer_name(OuterNorm q) { return q == OuterNorm::l2 ? "l2" : "lp"; }

std::vector<CapGroup> default_transverse_groups(std::size_t base_dim, std::size_t m) {
    if (m < 2 || m > base_dim + 1) throw ContractError("default_transverse_groups: need 2 <= m <= n");
    std::vector<CapGroup> out;
    const Vector corner = Vector::Constant(static_cast<Eigen::Index>(base_dim), -0.5);
    out.push_back({corner, 0.25});
    for (std::size_t i = 1; i < m; ++i) {
        Vector lower = corner;
        lower[static_cast<Eigen::Index>(i - 1)] = 0.25;
        out.push_back({lower, 0.25});
    }
    return out;
}

namespace {

std::vector<Vector> group_points(const CapGroup& g) {
    const auto d = static_cast<std::size_t>(g.lower.size());
    std::vector<Vector> pts;
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        Vector x = g.lower;
        for (std::size_t i = 0; i < d; ++i)
            if (mask >> i & 1) x[static_cast<Eigen::Index>(i)] += g.side;
        pts.push_back(x);
    }
    pts.push_back(g.lower + Vector::Constant(g.lower.size(), g.side / 2));
    return pts;
}

bool in_group(const CapGroup& g, const Vector& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] < g.lower[i] || x[i] >= g.lower[i] + g.side) return false;
    return true;
}

double aggregate(const std::vector<double>& norms, double q) {
    if (std::isinf(q)) return norms.empty() ? 0 : *std::max_element(norms.begin(), norms.end());
    double s = 0;
    for (double v : norms) s += std::pow(v, q);
    return std::pow(s, 1 / q);
}

}  // namespace

double group_transversality(const Signature& s, const std::vector<CapGroup>& groups) {
    if (groups.size() != s.n()) throw ContractError("group_transversality: need n groups");
    std::vector<std::vector<Vector>> normals;
    for (const auto& g : groups) {
        std::vector<Vector> ns;
        for (const auto& x : group_points(g)) ns.push_back(unit_normal(s, x));
        normals.push_back(std::move(ns));
    }
    double worst = INFINITY;
    std::vector<std::size_t> pick(groups.size(), 0);
    while (true) {
        std::vector<Vector> tuple;
        for (std::size_t i = 0; i < groups.size(); ++i) tuple.push_back(normals[i][pick[i]]);
        worst = std::min(worst, transversality_volume(tuple));
        std::size_t i = 0;
        while (i < pick.size() && ++pick[i] == normals[i].size()) pick[i++] = 0;
        if (i == pick.size()) break;
    }
    return worst;
}

double DecouplingMeasurement::denominator_for(OuterNorm q) const {
    const double qv = q == OuterNorm::l2 ? 2.0 : p;
    double prod = 1;
    const double m = static_cast<double>(cap_norms.size());
    for (const auto& group : cap_norms) prod *= std::pow(aggregate(group, qv), 1 / m);
    return prod;
}

GridSpec default_ratio_grid(std::size_t n, double delta, double h) {
    if (!(delta > 0 && delta <= 1)) throw ContractError("default_ratio_grid: delta must lie in (0, 1]");
    return GridSpec::ball_with_spacing(Vector::Zero(static_cast<Eigen::Index>(n)), 1 / delta, h);
}

DecouplingMeasurement decoupling_ratio(const FrequencySet& f, const CapPartition& caps, double p,
                                       const DecouplingFlavor& flavor, const GridSpec& grid,
                                       const RatioOptions& options) {
    if (!(p >= 1)) throw ContractError("decoupling_ratio: p must be >= 1");
    if (f.empty()) throw ContractError("decoupling_ratio: empty frequency set");
    const std::size_t n = f.n();
    if (flavor.arity != 1 && flavor.arity != n) throw ContractError("decoupling_ratio: arity must be 1 or n");

    // f_theta for every occupied cap, in cap-index order.
    std::vector<std::vector<std::size_t>> members(caps.size());
    for (std::size_t k = 0; k < f.size(); ++k) members[assign_atom(caps, f[k].xi).index].push_back(k);
    std::vector<std::size_t> occupied;
    std::vector<FrequencySet> pieces;
    for (std::size_t c = 0; c < caps.size(); ++c) {
        if (members[c].empty()) continue;
        FrequencySet piece(n);
        for (auto k : members[c]) piece.add(f[k].xi, f[k].a);
        if (f.lattice()) piece.set_lattice(*f.lattice());
        occupied.push_back(c);
        pieces.push_back(std::move(piece));
    }

    std::vector<FrequencySet> heads;                   // numerator factors
    std::vector<std::vector<std::size_t>> group_of;    // indices into pieces per factor
    if (flavor.arity == 1) {
        heads.push_back(f);
        std::vector<std::size_t> all(pieces.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        group_of.push_back(std::move(all));
    } else {
        if (!(flavor.nu > 0 && flavor.nu <= 1)) throw ContractError("decoupling_ratio: nu must lie in (0, 1]");
        if (caps.kind() != CapKind::hypersurface_box || !caps.surface())
            throw UnsupportedError("decoupling_ratio: multilinear flavor needs a hypersurface partition");
        const auto groups = options.groups ? *options.groups : default_transverse_groups(n - 1, flavor.arity);
        if (groups.size() != flavor.arity) throw ContractError("decoupling_ratio: group count must equal arity");
        const double vol = group_transversality(*caps.surface(), groups);
        if (!(vol > flavor.nu)) {
            std::ostringstream msg;
            msg << "decoupling_ratio: cap selection is not transverse (volume " << vol << " <= nu " << flavor.nu << ")";
            throw ContractError(msg.str());
        }
        if (caps.side() > groups[0].side + 1e-15)
            throw UnsupportedError("decoupling_ratio: caps are coarser than the multilinear groups");
        for (const auto& g : groups) {
            FrequencySet head(n);
            std::vector<std::size_t> inside;
            for (std::size_t i = 0; i < pieces.size(); ++i) {
                if (!in_group(g, caps[occupied[i]].center())) continue;
                inside.push_back(i);
                for (const auto& a : pieces[i].atoms()) head.add(a.xi, a.a);
            }
            if (inside.empty()) throw ContractError("decoupling_ratio: a multilinear group holds no atoms");
            if (f.lattice()) head.set_lattice(*f.lattice());
            heads.push_back(std::move(head));
            group_of.push_back(std::move(inside));
        }
    }

    std::vector<const FrequencySet*> sets;
    for (const auto& h : heads) sets.push_back(&h);
    for (const auto& pc : pieces) sets.push_back(&pc);
    std::vector<NormRequest> requests;
    NormRequest num{{}, p, WeightKind::none, false};
    for (std::size_t i = 0; i < heads.size(); ++i) num.sets.push_back(i);
    requests.push_back(num);
    for (std::size_t i = 0; i < pieces.size(); ++i)
        requests.push_back({{heads.size() + i}, p, options.denominator_weight, false});

    DecouplingMeasurement out;
    out.p = p;
    out.flavor = flavor;
    std::vector<double> values;
    if (options.refine) {
        auto r = refined_lp_norms(sets, grid, requests, options.eval, options.refine_tolerance, options.max_doublings);
        values = std::move(r.values);
        out.grid = r.grid;
        out.refine_change = r.max_relative_change;
        out.doublings = r.doublings;
    } else {
        values = stream_lp_norms(sets, grid, requests, options.eval);
        out.grid = grid;
    }
    out.numerator = values[0];
    for (const auto& group : group_of) {
        std::vector<double> norms;
        for (auto i : group) norms.push_back(values[1 + i]);
        out.caps_used += norms.size();
        out.cap_norms.push_back(std::move(norms));
    }
    out.denominator = out.denominator_for(flavor.outer);
    if (!(out.denominator > 0)) throw ContractError("decoupling_ratio: cap norms vanish");
    out.ratio = out.numerator / out.denominator;
    return out;
}

double predicted_lp_exponent(std::size_t n, double p) {
    if (n < 2) throw ContractError("predicted_lp_exponent: n must be >= 2");
    const double nd = static_cast<double>(n);
    const double critical = 2 * (nd + 1) / (nd - 1);
    if (p < critical) {
        std::ostringstream msg;
        msg << "predicted_lp_exponent: p = " << p << " is below the critical index " << critical
            << "; use predicted_l2_exponent";
        throw ContractError(msg.str());
    }
    if (std::isinf(p)) return -(nd - 1) / 2;
    return nd / p - (nd - 1) / 2;
}

double predicted_l2_exponent(std::size_t n, double p, const Signature& s) {
    if (s.n() != n) throw ContractError("predicted_l2_exponent: signature length must be n - 1");
    if (!(p >= 2)) throw ContractError("predicted_l2_exponent: p must be >= 2");
    const double nd = static_cast<double>(n);
    const double d = static_cast<double>(signature_d(s));
    if (d >= nd - 1) throw UnsupportedError("predicted_l2_exponent: d = n - 1 cannot occur");
    const double critical = 2 * (nd + 1 - d) / (nd - 1 - d);
    const double inv = std::isinf(p) ? 0.0 : 1 / p;
    if (p >= critical) return -(nd - 1) / 4 + (nd + 1) * inv / 2;
    return d * (-0.25 + inv / 2);
}

namespace {

void declare_lattice_if_valid(FrequencySet& set, std::vector<double> spacing) {
    try {
        set.set_lattice(std::move(spacing));
    } catch (const ContractError&) {
        // Off-lattice sets simply use the direct backend.
    }
}

}  // namespace

FrequencySet sharp_example_surface(const Signature& s, double delta, double spacing_factor) {
    dyadic_exponent(delta);
    if (!(spacing_factor > 0)) throw ContractError("sharp_example_surface: spacing factor must be > 0");
    const double h = spacing_factor * delta;
    const auto per_axis = static_cast<std::size_t>(std::floor(1 / h + 1e-9));
    const std::size_t m = s.base_dim();
    std::size_t total = 1;
    for (std::size_t i = 0; i < m; ++i) total *= per_axis;
    FrequencySet out(s.n());
    Vector base(static_cast<Eigen::Index>(m));
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        for (std::size_t i = 0; i < m; ++i) {
            base[static_cast<Eigen::Index>(i)] = -0.5 + static_cast<double>(rest % per_axis) * h;
            rest /= per_axis;
        }
        out.add(paraboloid_lift(s, base), 1.0);
    }
    bool integral = std::all_of(s.entries().begin(), s.entries().end(),
                                [](double v) { return v == std::round(v); });
    std::vector<double> spacing(s.n(), h);
    spacing.back() = integral ? h * h : 0.0;
    declare_lattice_if_valid(out, spacing);
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> null_pairs(const Signature& s) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<bool> used(s.base_dim(), false);
    for (std::size_t i = 0; i < s.base_dim(); ++i) {
        if (used[i] || s[i] < 0) continue;
        for (std::size_t j = 0; j < s.base_dim(); ++j) {
            if (!used[j] && s[j] == -s[i]) {
                used[i] = used[j] = true;
                pairs.emplace_back(i, j);
                break;
            }
        }
    }
    return pairs;
}

FrequencySet sharp_example_subspace(const Signature& s, double delta) {
    dyadic_exponent(delta);
    const std::size_t d = signature_d(s);
    if (d == 0) throw UnsupportedError("sharp_example_subspace: the surface is elliptic (d = 0)");
    const auto pairs = null_pairs(s);
    if (pairs.size() < d)
        throw UnsupportedError("sharp_example_subspace: entries do not form matched +/- pairs, so no null "
                               "subspace of dimension d exists");
    const auto per_axis = static_cast<std::size_t>(std::llround(1 / delta));
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= per_axis;
    FrequencySet out(s.n());
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vector base = Vector::Zero(static_cast<Eigen::Index>(s.base_dim()));
        std::size_t rest = flat;
        for (std::size_t l = 0; l < d; ++l) {
            const double t = -0.5 + static_cast<double>(rest % per_axis) * delta;
            rest /= per_axis;
            base[static_cast<Eigen::Index>(pairs[l].first)] = t;
            base[static_cast<Eigen::Index>(pairs[l].second)] = t;
        }
        out.add(paraboloid_lift(s, base), 1.0);
    }
    std::vector<double> spacing(s.n(), delta);
    spacing.back() = 0;
    declare_lattice_if_valid(out, spacing);
    return out;
}

ExponentFit fit_loglog(const std::vector<std::pair<double, double>>& series) {
    if (series.size() < 5) throw ContractError("fit: need at least 5 points");
    ExponentFit fit;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& [x, y] : series) {
        if (!(x > 0) || !(y > 0)) throw ContractError("fit: scales and values must be positive");
        const double lx = std::log2(x);
        fit.points.emplace_back(lx, std::log2(y));
        lo = std::min(lo, lx);
        hi = std::max(hi, lx);
    }
    if (hi - lo < 4 - 1e-12) throw ContractError("fit: points must span at least 4 octaves");
    const double k = static_cast<double>(fit.points.size());
    double sx = 0, sy = 0;
    for (const auto& [x, y] : fit.points) {
        sx += x;
        sy += y;
    }
    const double mx = sx / k, my = sy / k;
    double sxx = 0, sxy = 0;
    for (const auto& [x, y] : fit.points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    for (const auto& [x, y] : fit.points)
        fit.max_residual = std::max(fit.max_residual, std::abs(y - (fit.intercept + fit.slope * x)));
    return fit;
}

ExponentFit fit_exponent(const std::vector<std::pair<double, double>>& series) { return fit_loglog(series); }

}  // namespace declab
