#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "declab/caps.hpp"
#include "declab/sums.hpp"

namespace declab {

/// Outer norm over caps.
enum class OuterNorm { l2, lp };
std::string outer_name(OuterNorm q);

struct DecouplingFlavor {
    OuterNorm outer = OuterNorm::l2;
    std::size_t arity = 1;  ///< 1 (linear) or n (multilinear geometric mean)
    double nu = 0.125;      ///< transversality floor for arity > 1
};

/// Base box of a multilinear factor: prod [lower_i, lower_i + side).
struct CapGroup {
    Vector lower;
    double side;
};

/// m boxes of side 1/4: one at the all -1/2 corner and, for i >= 1, the
/// same box moved to the far end along axis i-1.
std::vector<CapGroup> default_transverse_groups(std::size_t base_dim, std::size_t m);

/// Smallest transversality volume over all choices of one corner-or-centre
/// normal per group.
double group_transversality(const Signature& s, const std::vector<CapGroup>& groups);

struct RatioOptions {
    /// Weight on the cap norms; the dominating weight max(1_B, w_B) keeps
    /// the single-cap ratio at most 1.
    WeightKind denominator_weight = WeightKind::dominating;
    EvalOptions eval;
    bool refine = true;
    double refine_tolerance = 5e-3;
    std::size_t max_doublings = 4;
    std::optional<std::vector<CapGroup>> groups;  ///< multilinear override
};

struct DecouplingMeasurement {
    double p = 0;
    DecouplingFlavor flavor;
    double numerator = 0;
    double denominator = 0;
    double ratio = 0;
    std::size_t caps_used = 0;
    /// Cap norms, grouped per multilinear factor (one group when linear).
    std::vector<std::vector<double>> cap_norms;
    GridSpec grid;
    double refine_change = 0;
    std::size_t doublings = 0;

    /// Denominator with a different outer norm (same cap norms).
    double denominator_for(OuterNorm q) const;
    double ratio_for(OuterNorm q) const { return numerator / denominator_for(q); }
};

/// Ball of radius 1/delta around the origin, spacing h.
GridSpec default_ratio_grid(std::size_t n, double delta, double h = 0.25);

/// ||f||_{L^p(B)} over the aggregate of cap norms ||f_theta||_{L^p(w_B)}.
DecouplingMeasurement decoupling_ratio(const FrequencySet& f, const CapPartition& caps, double p,
                                       const DecouplingFlavor& flavor, const GridSpec& grid,
                                       const RatioOptions& options = {});

/// n/p - (n-1)/2, for p >= 2(n+1)/(n-1).
double predicted_lp_exponent(std::size_t n, double p);
/// Piecewise exponent of the l^2 decoupling constant for the signature.
double predicted_l2_exponent(std::size_t n, double p, const Signature& s);

/// Unit atoms on the lift of the base grid {-1/2 + k h}, h = factor * delta.
FrequencySet sharp_example_surface(const Signature& s, double delta, double spacing_factor = 1.0);
/// Unit atoms along a d(s)-dimensional null subspace of the surface.
FrequencySet sharp_example_subspace(const Signature& s, double delta);
/// Pairs (i, j) with s_i = -s_j spanning the null subspace (greedy, in index order).
std::vector<std::pair<std::size_t, std::size_t>> null_pairs(const Signature& s);

struct ExponentFit {
    std::vector<std::pair<double, double>> points;  ///< (log2 scale, log2 value)
    double slope = 0;
    double intercept = 0;
    double max_residual = 0;
};

/// OLS of log2 value on log2 scale; needs >= 5 points over >= 4 octaves.
ExponentFit fit_loglog(const std::vector<std::pair<double, double>>& series);
/// Same fit for (delta, value) series: the slope is the exponent of delta.
ExponentFit fit_exponent(const std::vector<std::pair<double, double>>& series);

}  // namespace declab
