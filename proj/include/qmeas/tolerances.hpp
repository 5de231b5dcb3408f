#pragma once

#include <cstdint>
#include <string>

namespace qmeas {

/// Every numerical threshold in the library lives here so that CLI runs can
/// override any of them (`--tol-override key=value`). Defaults are the
/// contract values used by the tests.
struct Tolerances {
  double hermiticity = 1e-12;        // max|H - H^dag| entry, relative to max|H|
  double unitarity = 1e-10;          // |U^dag U - I|_F / sqrt(n)
  double eig_reconstruction = 1e-10; // |U L U^dag - H|_F / |H|_F
  double eig_cluster = 1e-9;         // relative eigenvalue gap for degenerate clusters
  double basis_orthonormal = 1e-10;  // |Tr(B_i B_j) - delta_ij|
  double gram_prune = 1e-9;          // relative Gram-Schmidt pruning threshold
  double gamma_reconstruction = 1e-10;
  double witt_null = 1e-9;           // relative null-eigenvalue cutoff
  double closure = 1e-8;             // off-span residual for closure checks
  double dedup = 1e-8;               // span projector comparison
  double branch_vanish = 1e-8;       // |v^T Q w| bound on isotropic branches
  int branch_cap = 16;               // max hyperbolic planes per decomposition
  int node_cap = 20000;              // recursion-node cap for subspace search
  double block_offdiag = 1e-8;       // off-block mass after rotation
  double constraint_drift = 1e-6;    // algebraic constraint bound along integration
  double blowup = 1e6;               // |p|_inf bound before declaring a singularity
  double completeness = 1e-6;        // |M1^dag M1 + M2^dag M2 - I|_F for inputs
  double endpoint_residual = 1e-4;   // least-squares normalization failure bound
  double center_cap = 10.0;          // |c| beyond which tanh saturates
  double merge_infidelity = 1e-12;   // path-state dedup threshold in enumeration
  double stability_infidelity = 1e-9;  // site-state drift treated as structural
  int bucket_cap = 16384;            // total live state buckets in enumeration
  std::uint64_t runaway_factor = 100;  // trajectory step cap = factor * N^2

  /// Set a field by its override key. Returns false for unknown keys.
  bool set(const std::string& key, double value);
};

Tolerances& default_tolerances();

}  // namespace qmeas
