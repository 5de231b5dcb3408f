#pragma once

#include <vector>

#include "qmeas/matcore.hpp"

namespace qmeas {

/// Symmetric (d+1)x(d+1) real form over control coordinates.
struct QuadraticForm {
  Eigen::MatrixXd entries;
  int dim() const { return static_cast<int>(entries.rows()); }
};

/// Structure constants of the half-anticommutator over a completed basis:
/// (1/2){H_i, H_j} = sum_k T_ij^k H_k, where H_0..H_d are the raw controls
/// (identity always at index 0) and H_k for k > d are orthonormal completions.
/// Only control rows (i, j <= d) are stored; k runs over the full basis.
struct StructureTensor {
  std::vector<HermitianOperator> controls;  // raw, identity prepended, pruned
  HermitianBasis basis;                     // orthonormal completed basis
  Eigen::MatrixXd control_in_basis;         // (d+1)x(d+1): controls in ortho coords
  std::vector<double> values;               // [(i*(d+1)+j)*n2 + k]
  std::vector<int> pruned;                  // dropped dependent user controls

  int d() const { return static_cast<int>(controls.size()) - 1; }
  int basis_size() const { return basis.size(); }
  double value(int i, int j, int k) const {
    const int m = d() + 1;
    return values[(static_cast<std::size_t>(i) * m + j) * basis_size() + k];
  }
  /// Element k of the expansion basis (raw control for k <= d, completion otherwise).
  const ComplexMatrix& element(int k) const;
};

/// Build the tensor from a control set. The identity is prepended when absent;
/// dependent controls are pruned and reported, never an error.
StructureTensor structure_tensor(const std::vector<HermitianOperator>& controls,
                                 const Tolerances& tol = default_tolerances());

/// The symmetric form p^T T^(k) p over control coordinates.
QuadraticForm control_form(const StructureTensor& t, int k);

/// max over k not in `keep` of |p^T T^(k) p|.
double constraint_residual(const Eigen::VectorXd& p, const StructureTensor& t,
                           const std::vector<int>& keep);

}  // namespace qmeas
