#pragma once

#include <cstddef>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "declab/lattice.hpp"
#include "declab/sums.hpp"

namespace declab {

using Count = boost::multiprecision::cpp_int;

/// Number of ordered 2k-tuples with l_1 + ... + l_k = l_{k+1} + ... + l_{2k}.
/// Full enumeration, so |set|^{2k} must stay below `guard`.
Count energy_bruteforce(const std::vector<IntVector>& set, std::size_t k, double guard = 1e8);
/// Real atoms: sums count as equal when every coordinate agrees to `tolerance`.
Count energy_bruteforce(const std::vector<Vector>& set, std::size_t k, double tolerance = 1e-9,
                        double guard = 1e8);

struct EnergyOptions {
    std::size_t workers = 1;
    /// Budget on the number of partial-sum entries held at once.
    std::size_t max_entries = std::size_t{1} << 26;
};

struct EnergyResult {
    Count value;
    std::size_t distinct_sums = 0;  ///< distinct k-fold sum keys
    double scale = 0;               ///< quantization step; 0 when exact
};

/// sum_s m_s^2 over the multiset of ordered k-fold sums, built by repeated
/// sorted pairwise merges. Exact for integer atoms.
EnergyResult energy_hashed(const std::vector<IntVector>& set, std::size_t k, const EnergyOptions& options = {});

/// Real atoms are quantized to the integer grid of step `scale` (0 picks
/// min-gap / 100). Keys within k steps of each other are merged; a merged
/// cluster wider than k steps in some coordinate is ambiguous and raises
/// CollisionError naming two of its sums.
EnergyResult energy_hashed(const std::vector<Vector>& set, std::size_t k, double scale = 0,
                           const EnergyOptions& options = {});

/// int_{T^n} |sum_l e(l . x)|^{2k} dx, computed exactly from the dense k-fold
/// self-convolution of the indicator of the set. The dense box of k-fold sums
/// must have at most `max_cells` cells.
Count moment_integral_torus(const std::vector<IntVector>& set, std::size_t k,
                            std::size_t max_cells = std::size_t{1} << 27);

/// {(l, l^2, ..., l^n) : l = 1..N}.
std::vector<IntVector> moment_curve_points(std::size_t N, std::size_t n);

/// B_k of the moment-curve points through the exact hashed path.
EnergyResult vinogradov_energy(std::size_t N, std::size_t n, std::size_t k, const EnergyOptions& options = {});

}  // namespace declab
