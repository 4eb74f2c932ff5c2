#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "declab/geometry.hpp"

namespace declab {

using Complex = std::complex<double>;

/// e(z) = exp(2 pi i z), with z reduced mod 1 first.
Complex unit_phase(double z);

struct Atom {
    Vector xi;
    Complex a;
};

/// Finite list of frequency atoms, optionally known to lie on a lattice
/// prod_i spacing_i Z. A zero spacing leaves that axis unconstrained.
class FrequencySet {
public:
    explicit FrequencySet(std::size_t n);
    FrequencySet(std::size_t n, std::vector<Atom> atoms);

    std::size_t n() const noexcept { return n_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    bool empty() const noexcept { return atoms_.empty(); }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    const Atom& operator[](std::size_t i) const { return atoms_[i]; }

    void add(Vector xi, Complex a);

    /// Declares (and verifies to 1e-12) the lattice; throws ContractError on mismatch.
    void set_lattice(std::vector<double> spacing);
    void set_lattice(double q) { set_lattice(std::vector<double>(n_, q)); }
    const std::optional<std::vector<double>>& lattice() const noexcept { return lattice_; }
    /// Integer coordinate of atom i along a lattice axis.
    long long lattice_coordinate(std::size_t atom, std::size_t axis) const;

    /// Atoms shifted by eta (the lattice is dropped unless eta respects it).
    FrequencySet translated(const Vector& eta) const;
    /// max_xi xi_i - min_xi xi_i.
    double spread(std::size_t axis) const;
    double coefficient_l2() const;

private:
    bool on_lattice(const std::vector<double>& spacing) const;

    std::size_t n_;
    std::vector<Atom> atoms_;
    std::optional<std::vector<double>> lattice_;
};

enum class GridShape { ball, cell };

/// Uniform sample grid, axis 0 fastest. Ball grids cover the circumscribing
/// cube of side 2R with midpoint nodes c - R + (j + 1/2) h; cell grids cover
/// prod [c_i - P_i/2, c_i + P_i/2) with nodes c_i - P_i/2 + j h.
class GridSpec {
public:
    static GridSpec ball(Vector center, double radius, std::vector<std::size_t> samples);
    /// Ball grid with the coarsest spacing <= h that divides 2R.
    static GridSpec ball_with_spacing(Vector center, double radius, double h);
    static GridSpec cell(Vector center, std::vector<double> periods, std::vector<std::size_t> samples);

    GridShape shape() const noexcept { return shape_; }
    std::size_t n() const noexcept { return samples_.size(); }
    const Vector& center() const noexcept { return center_; }
    double radius() const noexcept { return radius_; }
    double extent(std::size_t axis) const { return extent_[axis]; }
    std::size_t samples(std::size_t axis) const { return samples_[axis]; }
    const std::vector<std::size_t>& samples() const noexcept { return samples_; }
    double spacing(std::size_t axis) const { return extent_[axis] / static_cast<double>(samples_[axis]); }
    double node(std::size_t axis, std::size_t j) const;
    std::size_t total() const noexcept;
    /// Number of axis-0 rows, i.e. total() / samples(0).
    std::size_t rows() const noexcept;
    /// Node indices along axes 1.. of a row.
    std::vector<std::size_t> row_indices(std::size_t row) const;
    double cell_volume() const;
    /// True ball volume for ball grids; product of periods for cells.
    double measure() const;
    /// Same geometry with every per-axis sample count doubled.
    GridSpec refined() const;

private:
    GridShape shape_ = GridShape::cell;
    Vector center_;
    double radius_ = 0;
    std::vector<double> extent_;
    std::vector<std::size_t> samples_;
};

struct Field {
    GridSpec grid;
    std::vector<Complex> samples;
};

enum class Backend { automatic, direct, lattice_fft, row_fft };
std::string backend_name(Backend b);
Backend parse_backend(const std::string& name);

struct EvalOptions {
    Backend backend = Backend::automatic;
    std::size_t workers = 0;        ///< 0 picks default_workers()
    std::size_t max_fft_cells = std::size_t{1} << 27;
};

/// Backend that `automatic` resolves to for this set and grid.
Backend select_backend(const FrequencySet& set, const GridSpec& grid, const EvalOptions& options);

/// f(x_j) = sum_xi a_xi e(xi . x_j) on every node.
Field eval_exp_sum(const FrequencySet& set, const GridSpec& grid, const EvalOptions& options = {});

/// Row callback: values[s] holds samples(0) samples of set s on that row.
/// Called concurrently for distinct rows.
using RowVisitor = std::function<void(std::size_t row, const std::vector<const Complex*>& values)>;

/// Evaluates several sets row by row without materializing full fields
/// (except on the n-dimensional lattice path).
void evaluate_rows(const std::vector<const FrequencySet*>& sets, const GridSpec& grid,
                   const EvalOptions& options, const RowVisitor& visitor);

enum class WeightKind {
    none,        ///< ball indicator (ball grids) or the whole cell
    majorant,    ///< (1 + |x - c| / R)^{-10 n}
    dominating,  ///< max(ball indicator, majorant)
};
std::string weight_name(WeightKind w);

/// (1 + |x - c| / R)^{-10n}; for cell grids R is half the smallest period.
double weight_w(const GridSpec& grid, const Vector& x);

/// Quadrature of h^n sum |f|^p w, optionally divided by the measure; p = inf gives max |f| w.
double lp_norm(const Field& field, double p, WeightKind weight, bool normalized);
double lp_norm(const Field& field, double p, bool weighted, bool normalized);

/// || (prod_{s in sets} |f_s|)^{1/m} ||_p with m = sets.size().
struct NormRequest {
    std::vector<std::size_t> sets;
    double p = 2;
    WeightKind weight = WeightKind::none;
    bool normalized = false;
};

/// Norms of many requests from one streaming pass. Per-row partial sums are
/// reduced in row order, so results do not depend on the worker count.
std::vector<double> stream_lp_norms(const std::vector<const FrequencySet*>& sets, const GridSpec& grid,
                                    const std::vector<NormRequest>& requests, const EvalOptions& options = {});

struct RefinedNorms {
    std::vector<double> values;   ///< values on the accepted grid
    GridSpec grid;                ///< accepted grid
    double max_relative_change;   ///< against the previous grid
    std::size_t doublings;
};

/// Halving rule: refine until every norm changes by less than `tolerance`
/// relative to the previous grid, at most `max_doublings` times.
RefinedNorms refined_lp_norms(const std::vector<const FrequencySet*>& sets, const GridSpec& grid,
                              const std::vector<NormRequest>& requests, const EvalOptions& options = {},
                              double tolerance = 5e-3, std::size_t max_doublings = 4);

/// Sample count per period making the Riemann sum of |f|^p exact for even p
/// on a full period cell: smallest M > (p/2) * spread * period.
std::size_t exact_cell_samples(double spread, double period, double p);

struct Interval {
    double lo;
    double hi;
    double length() const { return hi - lo; }
};

/// Midpoint atoms (Phi(t_j), g(t_j) dt) of the moment-curve extension operator over I.
FrequencySet extension_atoms(const std::function<Complex(double)>& g, std::size_t n, Interval I,
                             std::size_t nodes);

/// E_I g on the grid with a fixed number of quadrature nodes.
Field extension_operator_fixed(const std::function<Complex(double)>& g, std::size_t n, Interval I,
                               std::size_t nodes, const GridSpec& grid, const EvalOptions& options = {});

struct ExtensionResult {
    Field field;
    std::size_t nodes;
    double relative_change;
};

/// E_I g with quadrature nodes doubled until the L^p norm changes by < 0.5%.
ExtensionResult extension_operator(const std::function<Complex(double)>& g, std::size_t n, Interval I,
                                   const GridSpec& grid, double p = 2, std::size_t initial_nodes = 0,
                                   const EvalOptions& options = {});

/// Writes <prefix>.c64 (raw little-endian complex64) and <prefix>.json (grid metadata).
void export_field(const Field& field, const std::string& prefix);

}  // namespace declab
