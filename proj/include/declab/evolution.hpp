#pragma once

#include <cstddef>
#include <vector>

#include "declab/geometry.hpp"
#include "declab/lattice.hpp"
#include "declab/sums.hpp"

namespace declab {

/// Schroedinger data on the unit torus T^{n-1}. The periods |s_i| of the
/// torus prod R/(|s_i| Z) are carried by the phase symbol sum_i s_i k_i^2.
struct TorusSpec {
    TorusSpec(Signature s, std::size_t N);

    Signature s;
    std::size_t N;
};

/// Fourier coefficients phi^(k), k in Z^{n-1}.
struct Modes {
    std::vector<IntVector> k;
    std::vector<Complex> c;

    std::size_t size() const noexcept { return k.size(); }
    void add(IntVector freq, Complex a);
    /// (sum |c|^2)^{1/2}.
    double l2() const;
};

/// sum_i s_i k_i^2.
double phase_symbol(const Signature& s, const IntVector& k);

/// Period-1 cell over T^{n-1} with nodes j / samples.
GridSpec torus_grid(std::size_t dim, std::size_t samples);

/// Samples of sum_k c_k e(x . k + t phase(k)) on the grid.
Field evolve(const TorusSpec& spec, const Modes& phi, double t, const GridSpec& grid,
             const EvalOptions& options = {});

struct StrichartzOptions {
    EvalOptions eval;
    /// Try the integer space-time torus when every s_i and |I| are integers.
    bool allow_torus_path = true;
    /// Time slices per unit length; 0 picks 4 N^2 max(1, sum |s_i|).
    std::size_t time_per_unit = 0;
    /// Spatial samples per axis; 0 picks max(4N + 1, pN + 1).
    std::size_t space_samples = 0;
    double tolerance = 5e-3;
    std::size_t max_doublings = 4;
};

struct StrichartzResult {
    double norm = 0;        ///< ||e^{itT} phi||_{L^p(T^{n-1} x I)}
    double phi_l2 = 0;
    double ratio = 0;       ///< norm / phi_l2
    double predicted_exponent = 0;
    bool torus_path = false;
    bool exact = false;     ///< alias-free sampling, no refinement involved
    std::size_t time_slices = 0;
    std::size_t space_samples = 0;
    double relative_change = 0;
};

/// Space-time L^p norm over T^{n-1} x I; requires |I| >= 1.
StrichartzResult strichartz_norm(const TorusSpec& spec, const Modes& phi, double p, Interval I,
                                 const StrichartzOptions& options = {});

/// phi^ = 1 on the integer points of the d-dimensional null subspace spanned
/// by e_i + e_j over matched pairs s_i = -s_j, within the cutoff.
Modes subspace_initial_data(const TorusSpec& spec);

/// Exponent of N in K^(2)(N^{-2}): -2 predicted_l2_exponent(n, p, s).
double predicted_strichartz_exponent(std::size_t n, double p, const Signature& s);

}  // namespace declab
