#include "declab/sums.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fftw3.h>
#include <json.hpp>

#include "declab/error.hpp"
#include "declab/parallel.hpp"

namespace declab {

Complex unit_phase(double z) {
    const double r = z - std::round(z);
    return std::polar(1.0, 2 * std::numbers::pi * r);
}

// ---------------------------------------------------------------------------
// FrequencySet

FrequencySet::FrequencySet(std::size_t n) : n_(n) {
    if (n == 0) throw ContractError("FrequencySet: dimension must be >= 1");
}

FrequencySet::FrequencySet(std::size_t n, std::vector<Atom> atoms) : FrequencySet(n) {
    for (auto& a : atoms) add(std::move(a.xi), a.a);
}

void FrequencySet::add(Vector xi, Complex a) {
    if (static_cast<std::size_t>(xi.size()) != n_) throw ContractError("FrequencySet: atom dimension mismatch");
    if (!xi.allFinite() || !std::isfinite(a.real()) || !std::isfinite(a.imag()))
        throw ContractError("FrequencySet: atoms must be finite");
    atoms_.push_back({std::move(xi), a});
    if (lattice_ && !on_lattice(*lattice_)) {
        atoms_.pop_back();
        throw ContractError("FrequencySet: atom is off the declared lattice");
    }
}

bool FrequencySet::on_lattice(const std::vector<double>& spacing) const {
    for (const auto& atom : atoms_) {
        for (std::size_t i = 0; i < n_; ++i) {
            const double q = spacing[i];
            if (q == 0) continue;
            const double x = atom.xi[static_cast<Eigen::Index>(i)];
            if (std::abs(x - q * std::round(x / q)) > 1e-12 * std::max(1.0, std::abs(x))) return false;
        }
    }
    return true;
}

void FrequencySet::set_lattice(std::vector<double> spacing) {
    if (spacing.size() != n_) throw ContractError("FrequencySet: lattice dimension mismatch");
    for (double q : spacing)
        if (!(q >= 0) || !std::isfinite(q)) throw ContractError("FrequencySet: lattice spacing must be >= 0");
    if (!on_lattice(spacing)) throw ContractError("FrequencySet: atoms do not lie on the declared lattice");
    lattice_ = std::move(spacing);
}

long long FrequencySet::lattice_coordinate(std::size_t atom, std::size_t axis) const {
    if (!lattice_ || (*lattice_)[axis] == 0) throw ContractError("FrequencySet: axis carries no lattice");
    return std::llround(atoms_[atom].xi[static_cast<Eigen::Index>(axis)] / (*lattice_)[axis]);
}

FrequencySet FrequencySet::translated(const Vector& eta) const {
    FrequencySet out(n_);
    out.atoms_.reserve(atoms_.size());
    for (const auto& a : atoms_) out.atoms_.push_back({a.xi + eta, a.a});
    if (lattice_ && out.on_lattice(*lattice_)) out.lattice_ = lattice_;
    return out;
}

double FrequencySet::spread(std::size_t axis) const {
    if (atoms_.empty()) return 0;
    double lo = atoms_[0].xi[static_cast<Eigen::Index>(axis)], hi = lo;
    for (const auto& a : atoms_) {
        lo = std::min(lo, a.xi[static_cast<Eigen::Index>(axis)]);
        hi = std::max(hi, a.xi[static_cast<Eigen::Index>(axis)]);
    }
    return hi - lo;
}

double FrequencySet::coefficient_l2() const {
    double s = 0;
    for (const auto& a : atoms_) s += std::norm(a.a);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// GridSpec

GridSpec GridSpec::ball(Vector center, double radius, std::vector<std::size_t> samples) {
    if (!(radius > 0)) throw ContractError("GridSpec: radius must be > 0");
    if (static_cast<std::size_t>(center.size()) != samples.size())
        throw ContractError("GridSpec: centre and sample counts disagree");
    for (auto m : samples)
        if (m < 2) throw ContractError("GridSpec: need at least 2 samples per axis");
    GridSpec g;
    g.shape_ = GridShape::ball;
    g.center_ = std::move(center);
    g.radius_ = radius;
    g.extent_.assign(samples.size(), 2 * radius);
    g.samples_ = std::move(samples);
    return g;
}

GridSpec GridSpec::ball_with_spacing(Vector center, double radius, double h) {
    if (!(h > 0)) throw ContractError("GridSpec: spacing must be > 0");
    const auto m = static_cast<std::size_t>(std::ceil(2 * radius / h - 1e-9));
    const std::size_t n = static_cast<std::size_t>(center.size());
    return ball(std::move(center), radius, std::vector<std::size_t>(n, std::max<std::size_t>(m, 2)));
}

GridSpec GridSpec::cell(Vector center, std::vector<double> periods, std::vector<std::size_t> samples) {
    if (static_cast<std::size_t>(center.size()) != samples.size() || periods.size() != samples.size())
        throw ContractError("GridSpec: centre, periods and sample counts disagree");
    for (auto m : samples)
        if (m < 2) throw ContractError("GridSpec: need at least 2 samples per axis");
    for (double p : periods)
        if (!(p > 0)) throw ContractError("GridSpec: periods must be > 0");
    GridSpec g;
    g.shape_ = GridShape::cell;
    g.center_ = std::move(center);
    g.radius_ = *std::min_element(periods.begin(), periods.end()) / 2;
    g.extent_ = std::move(periods);
    g.samples_ = std::move(samples);
    return g;
}

double GridSpec::node(std::size_t axis, std::size_t j) const {
    const double h = spacing(axis);
    const double lo = center_[static_cast<Eigen::Index>(axis)] - extent_[axis] / 2;
    const double offset = shape_ == GridShape::ball ? 0.5 : 0.0;
    return lo + (static_cast<double>(j) + offset) * h;
}

std::size_t GridSpec::total() const noexcept {
    return std::accumulate(samples_.begin(), samples_.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t GridSpec::rows() const noexcept { return total() / samples_[0]; }

std::vector<std::size_t> GridSpec::row_indices(std::size_t row) const {
    std::vector<std::size_t> idx(n(), 0);
    for (std::size_t i = 1; i < n(); ++i) {
        idx[i] = row % samples_[i];
        row /= samples_[i];
    }
    return idx;
}

double GridSpec::cell_volume() const {
    double v = 1;
    for (std::size_t i = 0; i < n(); ++i) v *= spacing(i);
    return v;
}

double GridSpec::measure() const {
    if (shape_ == GridShape::cell)
        return std::accumulate(extent_.begin(), extent_.end(), 1.0, std::multiplies<>());
    const double d = static_cast<double>(n());
    return std::pow(std::numbers::pi, d / 2) / std::tgamma(d / 2 + 1) * std::pow(radius_, d);
}

GridSpec GridSpec::refined() const {
    GridSpec g = *this;
    for (auto& m : g.samples_) m *= 2;
    return g;
}

// ---------------------------------------------------------------------------
// Backends

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::automatic: return "automatic";
        case Backend::direct: return "direct";
        case Backend::lattice_fft: return "lattice_fft";
        case Backend::row_fft: return "row_fft";
    }
    return "unknown";
}

Backend parse_backend(const std::string& name) {
    for (Backend b : {Backend::automatic, Backend::direct, Backend::lattice_fft, Backend::row_fft})
        if (backend_name(b) == name) return b;
    throw ContractError("unknown backend '" + name + "'");
}

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// DFT of `length` points realizing e(m q h j): bin (m * multiplier) mod length,
// sample j read at j mod length.
struct AxisPlan {
    std::size_t length = 0;
    long long multiplier = 1;

    std::size_t bin(long long m) const {
        const auto len = static_cast<long long>(length);
        long long b = (m % len) * (multiplier % len) % len;
        return static_cast<std::size_t>(b < 0 ? b + len : b);
    }
};

std::optional<AxisPlan> axis_plan(double q, double h, std::size_t samples) {
    if (!(q > 0)) return std::nullopt;
    const double period = 1 / (q * h);
    const double rounded = std::round(period);
    if (rounded >= 1 && std::abs(period - rounded) <= 1e-9 * rounded)
        return AxisPlan{static_cast<std::size_t>(rounded), 1};
    const double r = q * h * static_cast<double>(samples);
    const double rr = std::round(r);
    if (rr >= 1 && std::abs(r - rr) <= 1e-9 * rr) return AxisPlan{samples, static_cast<long long>(rr)};
    return std::nullopt;
}

class Plan {
public:
    Plan(int rank, const int* dims) {
        std::size_t total = 1;
        for (int i = 0; i < rank; ++i) total *= static_cast<std::size_t>(dims[i]);
        auto* buf = fftw_alloc_complex(total);
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft(rank, dims, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        if (!plan_) throw ConvergenceError("FFTW planning failed");
    }
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;

    void execute(Complex* data) const {
        auto* p = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(plan_, p, p);
    }

private:
    fftw_plan plan_ = nullptr;
};

std::optional<std::vector<AxisPlan>> full_plans(const FrequencySet& set, const GridSpec& grid,
                                                std::size_t max_cells) {
    if (!set.lattice()) return std::nullopt;
    std::vector<AxisPlan> plans;
    std::size_t cells = 1;
    for (std::size_t i = 0; i < grid.n(); ++i) {
        const auto p = axis_plan((*set.lattice())[i], grid.spacing(i), grid.samples(i));
        if (!p) return std::nullopt;
        // Plans longer than the grid axis only pay off when short.
        if (p->length > 2 * grid.samples(i)) return std::nullopt;
        cells *= p->length;
        if (cells > max_cells) return std::nullopt;
        plans.push_back(*p);
    }
    return plans;
}

std::optional<AxisPlan> row_plan(const FrequencySet& set, const GridSpec& grid) {
    if (!set.lattice()) return std::nullopt;
    const auto p = axis_plan((*set.lattice())[0], grid.spacing(0), grid.samples(0));
    if (!p || p->length > 8 * grid.samples(0)) return std::nullopt;
    return p;
}

void check_dims(const FrequencySet& set, const GridSpec& grid) {
    if (set.n() != grid.n()) throw ContractError("frequency set and grid dimensions disagree");
    if (set.empty()) throw ContractError("frequency set is empty");
}

// Phase of every atom at the first node of a row.
void row_start_phases(const FrequencySet& set, const GridSpec& grid, const std::vector<std::size_t>& idx,
                      std::vector<Complex>& out) {
    out.resize(set.size());
    std::vector<double> x(grid.n());
    x[0] = grid.node(0, 0);
    for (std::size_t i = 1; i < grid.n(); ++i) x[i] = grid.node(i, idx[i]);
    for (std::size_t k = 0; k < set.size(); ++k) {
        const auto& atom = set[k];
        double z = 0;
        for (std::size_t i = 0; i < grid.n(); ++i) {
            const double prod = atom.xi[static_cast<Eigen::Index>(i)] * x[i];
            z += prod - std::round(prod);
        }
        out[k] = atom.a * unit_phase(z);
    }
}

void direct_row(const FrequencySet& set, const GridSpec& grid, std::size_t row, Complex* out) {
    thread_local std::vector<Complex> start;
    const std::size_t m0 = grid.samples(0);
    row_start_phases(set, grid, grid.row_indices(row), start);
    std::fill(out, out + m0, Complex{});
    const double h0 = grid.spacing(0);
    for (std::size_t k = 0; k < set.size(); ++k) {
        const Complex step = unit_phase(set[k].xi[0] * h0);
        Complex v = start[k];
        // Reseed periodically so the recurrence error stays at rounding level.
        for (std::size_t j = 0; j < m0; ++j) {
            if (j % 256 == 0 && j > 0) v = start[k] * unit_phase(set[k].xi[0] * h0 * static_cast<double>(j));
            out[j] += v;
            v *= step;
        }
    }
}

struct RowFftPlan {
    AxisPlan axis;
    std::unique_ptr<Plan> plan;
    std::vector<std::size_t> bins;
};

std::unique_ptr<RowFftPlan> make_row_fft(const FrequencySet& set, const AxisPlan& axis) {
    auto rp = std::make_unique<RowFftPlan>();
    rp->axis = axis;
    const int len = static_cast<int>(axis.length);
    rp->plan = std::make_unique<Plan>(1, &len);
    rp->bins.resize(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) rp->bins[k] = axis.bin(set.lattice_coordinate(k, 0));
    return rp;
}

void fft_row(const FrequencySet& set, const GridSpec& grid, const RowFftPlan& rp, std::size_t row,
             Complex* out) {
    thread_local std::vector<Complex> start;
    thread_local std::vector<Complex> buf;
    row_start_phases(set, grid, grid.row_indices(row), start);
    buf.assign(rp.axis.length, Complex{});
    for (std::size_t k = 0; k < set.size(); ++k) buf[rp.bins[k]] += start[k];
    rp.plan->execute(buf.data());
    const std::size_t m0 = grid.samples(0), len = rp.axis.length;
    for (std::size_t j = 0; j < m0; j += len) std::copy_n(buf.data(), std::min(len, m0 - j), out + j);
}

Field lattice_field(const FrequencySet& set, const GridSpec& grid, const std::vector<AxisPlan>& plans) {
    const std::size_t n = grid.n();
    std::vector<int> dims(n);
    std::vector<std::size_t> stride(n);
    std::size_t cells = 1;
    for (std::size_t i = 0; i < n; ++i) {
        dims[n - 1 - i] = static_cast<int>(plans[i].length);
        stride[i] = cells;
        cells *= plans[i].length;
    }
    std::vector<Complex> coef(cells);
    std::vector<double> corner(n);
    for (std::size_t i = 0; i < n; ++i) corner[i] = grid.node(i, 0);
    for (std::size_t k = 0; k < set.size(); ++k) {
        std::size_t flat = 0;
        double z = 0;
        for (std::size_t i = 0; i < n; ++i) {
            flat += plans[i].bin(set.lattice_coordinate(k, i)) * stride[i];
            const double prod = set[k].xi[static_cast<Eigen::Index>(i)] * corner[i];
            z += prod - std::round(prod);
        }
        coef[flat] += set[k].a * unit_phase(z);
    }
    Plan plan(static_cast<int>(n), dims.data());
    plan.execute(coef.data());

    Field f{grid, std::vector<Complex>(grid.total())};
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t flat = 0; flat < f.samples.size(); ++flat) {
        std::size_t src = 0;
        for (std::size_t i = 0; i < n; ++i) src += (idx[i] % plans[i].length) * stride[i];
        f.samples[flat] = coef[src];
        for (std::size_t i = 0; i < n; ++i) {
            if (++idx[i] < grid.samples(i)) break;
            idx[i] = 0;
        }
    }
    return f;
}

std::size_t workers_of(const EvalOptions& o) { return o.workers == 0 ? default_workers() : o.workers; }

}  // namespace

Backend select_backend(const FrequencySet& set, const GridSpec& grid, const EvalOptions& options) {
    check_dims(set, grid);
    if (options.backend != Backend::automatic) return options.backend;
    if (const auto plans = full_plans(set, grid, options.max_fft_cells)) {
        std::size_t cells = 1;
        for (const auto& p : *plans) cells *= p.length;
        if (cells <= 4 * grid.total() && set.size() > 8) return Backend::lattice_fft;
    }
    if (const auto p = row_plan(set, grid)) {
        const double len = static_cast<double>(p->length);
        const double fft_cost = 5 * len * std::log2(std::max(2.0, len)) + static_cast<double>(set.size());
        // The direct recurrence is latency bound, several cycles per atom and node.
        if (6 * static_cast<double>(set.size() * grid.samples(0)) > fft_cost) return Backend::row_fft;
    }
    return Backend::direct;
}

void evaluate_rows(const std::vector<const FrequencySet*>& sets, const GridSpec& grid,
                   const EvalOptions& options, const RowVisitor& visitor) {
    const std::size_t ns = sets.size();
    std::vector<Backend> chosen(ns);
    std::vector<std::optional<Field>> full(ns);
    std::vector<std::unique_ptr<RowFftPlan>> rowp(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        chosen[s] = select_backend(*sets[s], grid, options);
        if (chosen[s] == Backend::lattice_fft) {
            const auto plans = full_plans(*sets[s], grid, options.max_fft_cells);
            if (!plans) throw UnsupportedError("lattice_fft backend needs a lattice commensurate with the grid");
            full[s] = lattice_field(*sets[s], grid, *plans);
        } else if (chosen[s] == Backend::row_fft) {
            const auto p = row_plan(*sets[s], grid);
            if (!p) throw UnsupportedError("row_fft backend needs an axis-0 lattice commensurate with the grid");
            rowp[s] = make_row_fft(*sets[s], *p);
        }
    }
    const std::size_t m0 = grid.samples(0);
    parallel_for(grid.rows(), workers_of(options), [&](std::size_t row) {
        thread_local std::vector<Complex> storage;
        storage.resize(ns * m0);
        std::vector<const Complex*> values(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            Complex* out = storage.data() + s * m0;
            switch (chosen[s]) {
                case Backend::lattice_fft:
                    values[s] = full[s]->samples.data() + row * m0;
                    continue;
                case Backend::row_fft:
                    fft_row(*sets[s], grid, *rowp[s], row, out);
                    break;
                default:
                    direct_row(*sets[s], grid, row, out);
                    break;
            }
            values[s] = out;
        }
        visitor(row, values);
    });
}

Field eval_exp_sum(const FrequencySet& set, const GridSpec& grid, const EvalOptions& options) {
    check_dims(set, grid);
    if (select_backend(set, grid, options) == Backend::lattice_fft) {
        const auto plans = full_plans(set, grid, options.max_fft_cells);
        if (!plans) throw UnsupportedError("lattice_fft backend needs a lattice commensurate with the grid");
        return lattice_field(set, grid, *plans);
    }
    Field f{grid, std::vector<Complex>(grid.total())};
    const std::size_t m0 = grid.samples(0);
    evaluate_rows({&set}, grid, options, [&](std::size_t row, const std::vector<const Complex*>& v) {
        std::copy(v[0], v[0] + m0, f.samples.begin() + static_cast<std::ptrdiff_t>(row * m0));
    });
    return f;
}

// ---------------------------------------------------------------------------
// Weights and norms

std::string weight_name(WeightKind w) {
    switch (w) {
        case WeightKind::none: return "none";
        case WeightKind::majorant: return "majorant";
        case WeightKind::dominating: return "dominating";
    }
    return "unknown";
}

double weight_w(const GridSpec& grid, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != grid.n()) throw ContractError("weight_w: dimension mismatch");
    const double r = (x - grid.center()).norm();
    return std::pow(1 + r / grid.radius(), -10.0 * static_cast<double>(grid.n()));
}

namespace {

// Evaluates |F|^p for F = (prod |f_s|)^{1/m}, given prod |f_s|^2.
// std::norm goes through hypot in libstdc++.
inline double squared_modulus(Complex z) { return z.real() * z.real() + z.imag() * z.imag(); }

struct PowerKernel {
    double exponent;  // p / (2m)
    int integer = -1;
    bool half = false;

    explicit PowerKernel(double p, std::size_t m) : exponent(p / (2.0 * static_cast<double>(m))) {
        const double r = std::round(exponent);
        if (std::abs(exponent - r) < 1e-14 && r >= 0 && r <= 32) integer = static_cast<int>(r);
        else if (std::abs(2 * exponent - std::round(2 * exponent)) < 1e-14 && 2 * exponent <= 65) half = true;
    }
    double operator()(double sq) const {
        if (integer >= 0) {
            double out = 1;
            for (int i = 0; i < integer; ++i) out *= sq;
            return out;
        }
        if (half) {
            const int k = static_cast<int>(std::lround(2 * exponent));
            const double root = std::sqrt(sq);
            double out = 1;
            for (int i = 0; i < k; ++i) out *= root;
            return out;
        }
        return std::pow(sq, exponent);
    }
    /// sum_j |v_j|^{2 exponent} w_j, skipping zero weights.
    double weighted_sum(const Complex* v, const double* w, std::size_t m) const {
        double acc = 0;
        switch (integer) {
            case 1:
                for (std::size_t j = 0; j < m; ++j)
                    if (w[j] != 0) acc += squared_modulus(v[j]) * w[j];
                return acc;
            case 2:
                for (std::size_t j = 0; j < m; ++j)
                    if (w[j] != 0) {
                        const double s = squared_modulus(v[j]);
                        acc += s * s * w[j];
                    }
                return acc;
            case 3:
                for (std::size_t j = 0; j < m; ++j)
                    if (w[j] != 0) {
                        const double s = squared_modulus(v[j]);
                        acc += s * s * s * w[j];
                    }
                return acc;
            default:
                for (std::size_t j = 0; j < m; ++j)
                    if (w[j] != 0) acc += (*this)(squared_modulus(v[j])) * w[j];
                return acc;
        }
    }
};

struct RowWeights {
    std::vector<double> indicator, majorant;
};

void compute_row_weights(const GridSpec& grid, std::size_t row, bool need_major, RowWeights& w) {
    const std::size_t m0 = grid.samples(0);
    const auto idx = grid.row_indices(row);
    double rest = 0;
    for (std::size_t i = 1; i < grid.n(); ++i) {
        const double d = grid.node(i, idx[i]) - grid.center()[static_cast<Eigen::Index>(i)];
        rest += d * d;
    }
    w.indicator.resize(m0);
    if (need_major) w.majorant.resize(m0);
    const double r = grid.radius();
    const double power = -10.0 * static_cast<double>(grid.n());
    for (std::size_t j = 0; j < m0; ++j) {
        const double d0 = grid.node(0, j) - grid.center()[0];
        const double dist = std::sqrt(rest + d0 * d0);
        w.indicator[j] = (grid.shape() == GridShape::cell || dist <= r) ? 1.0 : 0.0;
        if (need_major) w.majorant[j] = std::pow(1 + dist / r, power);
    }
}

double weight_at(const RowWeights& w, WeightKind kind, std::size_t j) {
    switch (kind) {
        case WeightKind::none: return w.indicator[j];
        case WeightKind::majorant: return w.majorant[j];
        case WeightKind::dominating: return std::max(w.indicator[j], w.majorant[j]);
    }
    return 0;
}

double finish_norm(double acc, const NormRequest& r, const GridSpec& grid) {
    if (std::isinf(r.p)) return acc;
    double integral = acc * grid.cell_volume();
    if (r.normalized) integral /= grid.measure();
    return std::pow(integral, 1 / r.p);
}

void validate_request(const NormRequest& r, std::size_t nsets) {
    if (!(r.p >= 1)) throw ContractError("lp norm: p must be >= 1");
    if (r.sets.empty()) throw ContractError("lp norm: request names no sets");
    for (auto s : r.sets)
        if (s >= nsets) throw ContractError("lp norm: request names an unknown set");
}

}  // namespace

std::vector<double> stream_lp_norms(const std::vector<const FrequencySet*>& sets, const GridSpec& grid,
                                    const std::vector<NormRequest>& requests, const EvalOptions& options) {
    for (const auto& r : requests) validate_request(r, sets.size());
    const bool need_major = std::any_of(requests.begin(), requests.end(),
                                        [](const NormRequest& r) { return r.weight != WeightKind::none; });
    const std::size_t rows = grid.rows();
    const std::size_t m0 = grid.samples(0);
    std::vector<std::vector<double>> partial(requests.size(), std::vector<double>(rows, 0.0));
    std::vector<PowerKernel> kernels;
    for (const auto& r : requests) kernels.emplace_back(std::isinf(r.p) ? 2.0 : r.p, r.sets.size());

    evaluate_rows(sets, grid, options, [&](std::size_t row, const std::vector<const Complex*>& values) {
        thread_local RowWeights w;
        thread_local std::vector<double> dominating;
        compute_row_weights(grid, row, need_major, w);
        if (need_major) {
            dominating.resize(m0);
            for (std::size_t j = 0; j < m0; ++j) dominating[j] = std::max(w.indicator[j], w.majorant[j]);
        }
        for (std::size_t q = 0; q < requests.size(); ++q) {
            const auto& req = requests[q];
            const double* wt = req.weight == WeightKind::none       ? w.indicator.data()
                               : req.weight == WeightKind::majorant ? w.majorant.data()
                                                                    : dominating.data();
            double acc = 0;
            if (std::isinf(req.p)) {
                for (std::size_t j = 0; j < m0; ++j) {
                    if (wt[j] == 0) continue;
                    double sq = 1;
                    for (auto s : req.sets) sq *= squared_modulus(values[s][j]);
                    acc = std::max(acc, std::pow(sq, 0.5 / static_cast<double>(req.sets.size())) * wt[j]);
                }
            } else if (req.sets.size() == 1) {
                acc = kernels[q].weighted_sum(values[req.sets[0]], wt, m0);
            } else {
                for (std::size_t j = 0; j < m0; ++j) {
                    if (wt[j] == 0) continue;
                    double sq = 1;
                    for (auto s : req.sets) sq *= squared_modulus(values[s][j]);
                    acc += kernels[q](sq) * wt[j];
                }
            }
            partial[q][row] = acc;
        }
    });

    std::vector<double> out(requests.size());
    for (std::size_t q = 0; q < requests.size(); ++q) {
        double acc = 0;
        if (std::isinf(requests[q].p)) {
            for (double v : partial[q]) acc = std::max(acc, v);
        } else {
            for (double v : partial[q]) acc += v;
        }
        out[q] = finish_norm(acc, requests[q], grid);
    }
    return out;
}

double lp_norm(const Field& field, double p, WeightKind weight, bool normalized) {
    const GridSpec& grid = field.grid;
    if (field.samples.size() != grid.total()) throw ContractError("lp_norm: field size mismatch");
    NormRequest req{{0}, p, weight, normalized};
    validate_request(req, 1);
    const PowerKernel kernel(std::isinf(p) ? 2.0 : p, 1);
    const std::size_t m0 = grid.samples(0);
    RowWeights w;
    double acc = 0;
    for (std::size_t row = 0; row < grid.rows(); ++row) {
        compute_row_weights(grid, row, weight != WeightKind::none, w);
        for (std::size_t j = 0; j < m0; ++j) {
            const double wt = weight_at(w, weight, j);
            if (wt == 0) continue;
            const Complex v = field.samples[row * m0 + j];
            if (std::isinf(p)) acc = std::max(acc, std::abs(v) * wt);
            else acc += kernel(squared_modulus(v)) * wt;
        }
    }
    return finish_norm(acc, req, grid);
}

double lp_norm(const Field& field, double p, bool weighted, bool normalized) {
    return lp_norm(field, p, weighted ? WeightKind::majorant : WeightKind::none, normalized);
}

RefinedNorms refined_lp_norms(const std::vector<const FrequencySet*>& sets, const GridSpec& grid,
                              const std::vector<NormRequest>& requests, const EvalOptions& options,
                              double tolerance, std::size_t max_doublings) {
    std::vector<double> prev = stream_lp_norms(sets, grid, requests, options);
    GridSpec current = grid;
    double change = 0;
    for (std::size_t d = 1; d <= max_doublings; ++d) {
        current = current.refined();
        std::vector<double> next = stream_lp_norms(sets, current, requests, options);
        change = 0;
        for (std::size_t q = 0; q < next.size(); ++q) {
            const double scale = std::max(std::abs(prev[q]), std::abs(next[q]));
            if (scale > 0) change = std::max(change, std::abs(next[q] - prev[q]) / scale);
        }
        if (change < tolerance) return {std::move(next), current, change, d};
        prev = std::move(next);
    }
    std::ostringstream msg;
    msg << "quadrature did not settle after " << max_doublings << " doublings (last change " << change << ")";
    throw ConvergenceError(msg.str());
}

std::size_t exact_cell_samples(double spread, double period, double p) {
    if (!(p >= 2) || std::abs(p / 2 - std::round(p / 2)) > 0 || std::isinf(p))
        throw ContractError("exact_cell_samples: p must be an even integer");
    if (!(spread >= 0) || !(period > 0)) throw ContractError("exact_cell_samples: invalid spread or period");
    const double bandwidth = p / 2 * spread * period;
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(bandwidth + 1e-9)) + 1);
}

// ---------------------------------------------------------------------------
// Extension operator

FrequencySet extension_atoms(const std::function<Complex(double)>& g, std::size_t n, Interval I,
                             std::size_t nodes) {
    if (nodes == 0) throw ContractError("extension_atoms: need at least one node");
    if (!(I.hi > I.lo)) throw ContractError("extension_atoms: empty interval");
    FrequencySet set(n);
    const double dt = I.length() / static_cast<double>(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        const double t = I.lo + (static_cast<double>(j) + 0.5) * dt;
        Vector xi(static_cast<Eigen::Index>(n));
        double pw = 1;
        for (std::size_t k = 0; k < n; ++k) xi[static_cast<Eigen::Index>(k)] = (pw *= t);
        set.add(std::move(xi), g(t) * dt);
    }
    return set;
}

Field extension_operator_fixed(const std::function<Complex(double)>& g, std::size_t n, Interval I,
                               std::size_t nodes, const GridSpec& grid, const EvalOptions& options) {
    EvalOptions o = options;
    o.backend = Backend::direct;
    return eval_exp_sum(extension_atoms(g, n, I, nodes), grid, o);
}

ExtensionResult extension_operator(const std::function<Complex(double)>& g, std::size_t n, Interval I,
                                   const GridSpec& grid, double p, std::size_t initial_nodes,
                                   const EvalOptions& options) {
    if (initial_nodes == 0) {
        // Phase rate in t is bounded by sum_k k t^{k-1} |x_k|.
        const double tmax = std::max(std::abs(I.lo), std::abs(I.hi));
        double rate = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const double xk = std::abs(grid.center()[static_cast<Eigen::Index>(k)]) + grid.extent(k) / 2;
            rate += static_cast<double>(k + 1) * std::pow(tmax, static_cast<double>(k)) * xk;
        }
        initial_nodes = std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(2 * rate * I.length())));
    }
    Field prev = extension_operator_fixed(g, n, I, initial_nodes, grid, options);
    double prev_norm = lp_norm(prev, p, WeightKind::none, true);
    std::size_t nodes = initial_nodes;
    double change = 0;
    for (int d = 0; d < 4; ++d) {
        nodes *= 2;
        Field next = extension_operator_fixed(g, n, I, nodes, grid, options);
        const double norm = lp_norm(next, p, WeightKind::none, true);
        change = std::abs(norm - prev_norm) / std::max(norm, prev_norm);
        if (change < 5e-3 || std::max(norm, prev_norm) == 0) return {std::move(next), nodes, change};
        prev = std::move(next);
        prev_norm = norm;
    }
    std::ostringstream msg;
    msg << "extension_operator: quadrature did not settle after 4 doublings (last change " << change << ")";
    throw ConvergenceError(msg.str());
}

// ---------------------------------------------------------------------------
// Export

void export_field(const Field& field, const std::string& prefix) {
    std::ofstream raw(prefix + ".c64", std::ios::binary);
    if (!raw) throw ContractError("export_field: cannot open " + prefix + ".c64");
    for (const Complex& v : field.samples) {
        const float parts[2] = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
        unsigned char bytes[8];
        for (int k = 0; k < 2; ++k) {
            std::uint32_t u;
            std::memcpy(&u, &parts[k], 4);
            for (int b = 0; b < 4; ++b) bytes[4 * k + b] = static_cast<unsigned char>(u >> (8 * b));
        }
        raw.write(reinterpret_cast<const char*>(bytes), 8);
    }
    nlohmann::json meta;
    const GridSpec& g = field.grid;
    meta["format"] = "complex64-le";
    meta["layout"] = "axis0-fastest";
    meta["shape"] = g.shape() == GridShape::ball ? "ball" : "cell";
    meta["radius"] = g.radius();
    meta["center"] = std::vector<double>(g.center().data(), g.center().data() + g.center().size());
    std::vector<double> extent, spacing, first;
    for (std::size_t i = 0; i < g.n(); ++i) {
        extent.push_back(g.extent(i));
        spacing.push_back(g.spacing(i));
        first.push_back(g.node(i, 0));
    }
    meta["samples"] = g.samples();
    meta["extent"] = extent;
    meta["spacing"] = spacing;
    meta["first_node"] = first;
    std::ofstream js(prefix + ".json");
    js << meta.dump(2) << '\n';
}

}  // namespace declab
