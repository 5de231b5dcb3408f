#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

#include "qmeas/tolerances.hpp"

namespace qmeas {

using cd = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

/// A validated Hermitian matrix. Construction rejects inputs whose
/// max-entry deviation from the adjoint exceeds tol.hermiticity * max|H|;
/// the stored matrix is the symmetrized (H + H^dag)/2.
class HermitianOperator {
 public:
  explicit HermitianOperator(ComplexMatrix m,
                             const Tolerances& tol = default_tolerances());
  const ComplexMatrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  ComplexMatrix m_;
};

/// A validated unitary matrix: |U^dag U - I|_F <= tol.unitarity * sqrt(n).
class UnitaryOperator {
 public:
  explicit UnitaryOperator(ComplexMatrix m,
                           const Tolerances& tol = default_tolerances());
  const ComplexMatrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  ComplexMatrix m_;
};

/// Eigenvalues ascending plus a deterministic diagonalizing frame.
struct EigenSystem {
  Eigen::VectorXd eigenvalues;
  UnitaryOperator frame;
};

/// Hilbert-Schmidt orthonormal Hermitian basis; the first control_count
/// elements span the (pruned) controls it was completed from.
struct HermitianBasis {
  std::vector<HermitianOperator> elements;
  int control_count = 0;
  std::vector<int> pruned;  // input indices dropped as linearly dependent
  int size() const { return static_cast<int>(elements.size()); }
};

/// (AB + BA)/2
HermitianOperator anticommutator(const HermitianOperator& a, const HermitianOperator& b);

/// Ascending eigenvalues with a canonical frame: degenerate clusters
/// (relative gap <= tol.eig_cluster) are re-spanned by Gram-Schmidt against
/// the standard basis in index order, and every column's first significant
/// entry is rotated to the positive real axis. Identical inputs always give
/// identical frames.
EigenSystem eigensystem(const HermitianOperator& h,
                        const Tolerances& tol = default_tolerances());

/// U f(Lambda) U^dag. Throws DomainError if f is not finite on the spectrum.
HermitianOperator scalar_function(const HermitianOperator& h,
                                  const std::function<double(double)>& f,
                                  const Tolerances& tol = default_tolerances());

/// Tr(A^dag B)
cd hs_inner(const ComplexMatrix& a, const ComplexMatrix& b);

double frobenius(const ComplexMatrix& m);

/// Gram-Schmidt the controls (pruning dependent ones, reported), then extend
/// with canonical Hermitian directions to a full orthonormal basis of n^2
/// elements.
HermitianBasis complete_basis(const std::vector<HermitianOperator>& controls,
                              const Tolerances& tol = default_tolerances());

/// The n^2 canonical Hermitian directions used for completion: diagonal
/// units, then symmetric and antisymmetric off-diagonal pairs in
/// lexicographic order. All unit Hilbert-Schmidt norm.
std::vector<ComplexMatrix> canonical_hermitian_directions(int n);

/// Real coordinates of a Hermitian matrix in the canonical orthonormal basis
/// of the n^2-dimensional real space of Hermitian matrices. Isometric for the
/// Hilbert-Schmidt inner product.
Eigen::VectorXd hermitian_coords(const ComplexMatrix& h);
ComplexMatrix hermitian_from_coords(const Eigen::VectorXd& v, int n);

/// Gram-Schmidt over Hermitian matrices in HS geometry with real
/// coefficients; dependent generators are dropped at the relative prune
/// threshold.
std::vector<HermitianOperator> orthonormalize_hermitian(
    const std::vector<ComplexMatrix>& gens, double prune,
    const Tolerances& tol = default_tolerances());

}  // namespace qmeas
