#pragma once

#include <cstddef>
#include <vector>

#include "declab/sums.hpp"

namespace declab {

using IntVector = std::vector<long long>;

/// Subgroup of Z^d spanned by a generating set, kept in Hermite normal form
/// (rows in echelon order, positive pivots, entries above each pivot reduced).
class IntegerLattice {
public:
    explicit IntegerLattice(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t rank() const noexcept { return basis_.size(); }
    const std::vector<IntVector>& basis() const noexcept { return basis_; }
    const std::vector<std::size_t>& pivots() const noexcept { return pivots_; }

    void insert(IntVector v);
    /// m with v = sum_i m_i basis_i; throws DomainError if v is not in the lattice.
    IntVector coordinates(const IntVector& v) const;

private:
    void normalize();

    std::size_t dim_;
    std::vector<IntVector> basis_;
    std::vector<std::size_t> pivots_;
};

IntegerLattice lattice_span(const std::vector<IntVector>& vectors, std::size_t dim);

struct TorusNorm {
    double value;             ///< (int_{T^d} |F|^p)^{1/p}
    std::size_t reduced_rank; ///< dimension of the torus actually sampled
    std::vector<std::size_t> samples;
    bool exact;               ///< even p with alias-free sampling
};

/// L^p norm over the unit torus T^d of sum_j c_j e(k_j . x), k_j in Z^d.
/// The frequencies are rewritten in a basis of the lattice they span, and
/// the integral is taken over the lower-dimensional torus that basis
/// parametrizes (Haar measure is preserved by the surjection x -> Bx).
TorusNorm torus_lp_norm(const std::vector<IntVector>& freq, const std::vector<Complex>& coef, double p,
                        const EvalOptions& options = {});

}  // namespace declab
