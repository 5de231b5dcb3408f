#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "qmeas/dynamics.hpp"
#include "qmeas/kernels.hpp"
#include "qmeas/rng.hpp"

namespace qmeas {

/// Exact weak-measurement step operators for one probe interaction:
/// M_pm = (cos(delta E) -/+ sin(delta E)) / sqrt(2).
std::pair<ComplexMatrix, ComplexMatrix> step_operators(const HermitianOperator& e,
                                                       double delta);

enum class Outcome { Plus, Minus };

struct WalkConfig {
  ControlSchedule schedule;
  double delta = 0.0;
  double boundary = 0.0;  // X; absorption at |x| >= X
  Eigen::VectorXcd psi0;
  std::uint64_t seed = 0;
  int trajectories = 0;

  int boundary_steps() const;  // N = X / delta
  void validate(const Tolerances& tol = default_tolerances()) const;
};

/// Step operators tabulated on the visited lattice sites j*delta,
/// |j| <= N-1, flattened row-major for the kernels.
struct StepTable {
  int n = 0;
  int boundary = 0;  // N
  double delta = 0.0;
  std::vector<kernels::cd> mplus, mminus;
  const kernels::cd* plus(int j) const {
    return mplus.data() + static_cast<std::size_t>(j + boundary - 1) * n * n;
  }
  const kernels::cd* minus(int j) const {
    return mminus.data() + static_cast<std::size_t>(j + boundary - 1) * n * n;
  }
};

StepTable build_step_table(const ControlSchedule& schedule, double delta, int boundary_n);

struct StepOutcome {
  double x_new = 0.0;
  Eigen::VectorXcd psi;
  Outcome outcome = Outcome::Plus;
  double p_plus = 0.0, p_minus = 0.0;
};

/// One feedback step: sample the probe readout with Born weights
/// |M_pm(x) psi|^2, renormalize, move the pointer by +/- delta.
StepOutcome walk_step(double x, const Eigen::VectorXcd& psi, const ControlSchedule& schedule,
                      double delta, SplitMix64& rng);

struct TrajectoryRecord {
  Outcome outcome = Outcome::Plus;
  std::uint64_t steps = 0;
  Eigen::VectorXcd final_state;
  std::uint64_t path_checksum = 0;
};

TrajectoryRecord run_trajectory(const WalkConfig& config, const StepTable& table,
                                std::uint64_t index,
                                const Tolerances& tol = default_tolerances());

/// All trajectories of the config, parallel over a thread pool, collected in
/// index order. threads = 0 reads QMEAS_THREADS, then hardware concurrency.
std::vector<TrajectoryRecord> run_trajectories(const WalkConfig& config,
                                               const Tolerances& tol = default_tolerances(),
                                               int threads = 0);

struct WalkOperators {
  ComplexMatrix m_plus;   // unnormalized product toward +X
  ComplexMatrix m_minus;  // toward -X
  std::optional<UnitaryOperator> diag_frame;
  Eigen::VectorXcd n_diag_plus, n_diag_minus;  // rotated diagonals (closed form)
  double offdiag_mass = 0.0;
  double ode_gap = 0.0;  // product vs propagation-integration disagreement
};

/// Ordered products of sqrt(2)-normalized step operators over the lattice,
/// cross-checked against integration of the propagation equation
/// dM/dx = -eps(x) M. The product is authoritative.
WalkOperators total_walk_operator(const ControlSchedule& schedule, double x_boundary,
                                  double delta,
                                  const Tolerances& tol = default_tolerances());

struct MeasurementPair {
  ComplexMatrix m1, m2;
  double completeness_residual = 0.0;
  double a = 0.0, b = 0.0;  // scales applied to the two products
};

/// Positive scalars (a, b) minimizing |a^2 M+^dag M+ + b^2 M-^dag M- - I|_F
/// (closed-form least squares), applied to the endpoint products.
MeasurementPair endpoint_pair(const WalkOperators& w,
                              const Tolerances& tol = default_tolerances());

struct PathBucket {
  Eigen::VectorXcd state;      // normalized representative
  double probability = 0.0;
  double log2_multiplicity = 0.0;  // path count in log2 (they grow fast)
};

struct EnumerateOptions {
  std::uint64_t max_steps = 0;  // 0: runaway_factor * N^2
  double tail_stop = 1e-14;
};

struct EnumerateResult {
  double p_plus = 0.0, p_minus = 0.0, tail = 0.0;
  std::vector<PathBucket> plus_states, minus_states;
  std::uint64_t sweeps = 0;
  bool chain_solved = false;  // absorption finished by the exact linear solve
};

/// Exact dynamic program over (site, state) pairs: every absorbing path is
/// summed, with states deduplicated at tol.merge_infidelity. When the bucket
/// structure stabilizes (path-independent schedules, N > 12) the remaining
/// absorption is finished exactly by a linear solve on the induced chain.
EnumerateResult enumerate_paths(const WalkConfig& config,
                                const Tolerances& tol = default_tolerances(),
                                const EnumerateOptions& opts = {});

/// CSV layout: seed,index,outcome,steps,path_checksum,final_state_re_*,
/// final_state_im_* with 17 significant digits.
void write_trajectories_csv(std::ostream& os, const WalkConfig& config,
                            const std::vector<TrajectoryRecord>& records);

}  // namespace qmeas
