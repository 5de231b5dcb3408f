#include "qmeas/tolerances.hpp"

#include <cmath>

namespace qmeas {

bool Tolerances::set(const std::string& key, double value) {
  if (key == "hermiticity") hermiticity = value;
  else if (key == "unitarity") unitarity = value;
  else if (key == "eig_reconstruction") eig_reconstruction = value;
  else if (key == "eig_cluster") eig_cluster = value;
  else if (key == "basis_orthonormal") basis_orthonormal = value;
  else if (key == "gram_prune") gram_prune = value;
  else if (key == "gamma_reconstruction") gamma_reconstruction = value;
  else if (key == "witt_null") witt_null = value;
  else if (key == "closure") closure = value;
  else if (key == "dedup") dedup = value;
  else if (key == "branch_vanish") branch_vanish = value;
  else if (key == "branch_cap") branch_cap = static_cast<int>(std::lround(value));
  else if (key == "node_cap") node_cap = static_cast<int>(std::lround(value));
  else if (key == "block_offdiag") block_offdiag = value;
  else if (key == "constraint_drift") constraint_drift = value;
  else if (key == "blowup") blowup = value;
  else if (key == "completeness") completeness = value;
  else if (key == "endpoint_residual") endpoint_residual = value;
  else if (key == "center_cap") center_cap = value;
  else if (key == "merge_infidelity") merge_infidelity = value;
  else if (key == "stability_infidelity") stability_infidelity = value;
  else if (key == "bucket_cap") bucket_cap = static_cast<int>(std::lround(value));
  else if (key == "runaway_factor") runaway_factor = static_cast<std::uint64_t>(std::llround(value));
  else return false;
  return true;
}

Tolerances& default_tolerances() {
  static Tolerances t;
  return t;
}

}  // namespace qmeas
