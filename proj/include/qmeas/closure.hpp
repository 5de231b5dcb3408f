#pragma once

#include <utility>
#include <vector>

#include "qmeas/structure.hpp"

namespace qmeas {

/// Canonical splitting of a symmetric form: hyperbolic planes, nullspace,
/// definite remainder. `isometry` maps canonical coordinates to control
/// coordinates; its column layout is [plane_0(+,-), plane_1(+,-), ...,
/// null..., aniso...] and the form in canonical coordinates is
/// diag(+1,-1, ..., 0..., aniso_sign...).
struct WittDecomposition {
  Eigen::MatrixXd isometry;
  int hyperbolic_count = 0;
  Eigen::MatrixXd null_basis;   // dim x z
  Eigen::MatrixXd aniso_basis;  // dim x a, scaled to |form value| = 1
  std::vector<int> aniso_signs;
};

WittDecomposition witt_decompose(const QuadraticForm& q, double tol);

/// One isotropic branch: the span of (plane_+ + x_i * plane_-) over all planes
/// plus the nullspace, expressed in control coordinates (columns).
struct IsotropicBranch {
  std::vector<int> signs;
  Eigen::MatrixXd subspace_basis;
};

std::vector<IsotropicBranch> isotropic_branches(
    const WittDecomposition& w, const Tolerances& tol = default_tolerances());

struct ClosureCheck {
  bool closed = false;
  double residual = 0.0;
};

/// Residual = max over basis pairs of the off-span Frobenius mass of their
/// half-anticommutator.
ClosureCheck closure_check(const std::vector<HermitianOperator>& basis, double tol);

/// An anticommutation-closed span, with the (k, sign-vector) choices that
/// produced it.
struct ClosedSubspace {
  std::vector<HermitianOperator> matrix_basis;  // orthonormal, identity direction first
  double closure_residual = 0.0;
  std::vector<std::pair<int, std::vector<int>>> provenance;
  int dim() const { return static_cast<int>(matrix_basis.size()); }
};

struct ClosureOptions {
  bool exhaustive = false;  // branch over every violating k, not just the first
  bool keep_non_maximal = false;
};

struct ClosureResult {
  std::vector<ClosedSubspace> subspaces;     // maximal ones, deterministic order
  std::vector<ClosedSubspace> non_maximal;   // only filled in keep_non_maximal mode
  int nodes_explored = 0;
};

/// Recursive enumeration: check closure; otherwise Witt-decompose the first
/// violating constraint form, branch over its isotropic subspaces, restrict,
/// and recurse. Results are deduplicated by span projector and filtered to
/// maximal elements.
ClosureResult find_closed_subspaces(const std::vector<HermitianOperator>& controls,
                                    const Tolerances& tol = default_tolerances(),
                                    const ClosureOptions& opts = {});

}  // namespace qmeas
