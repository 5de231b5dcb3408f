#pragma once

#include <string>
#include <vector>

#include "qmeas/jordan.hpp"
#include "qmeas/walk.hpp"

namespace qmeas {

struct TargetMeasurement {
  ComplexMatrix m1;
  double tolerance = 1e-6;  // open-interval margin on singular values
};

struct EigenvalueGroup {
  int block = 0;
  double value = 0.0;
  int multiplicity = 0;
};

struct AchievabilityReport {
  bool achievable = false;
  int spectrum_count = 0;  // capacity of the decomposition
  std::vector<EigenvalueGroup> block_assignment;
  std::vector<std::string> violations;
};

/// Check a target against a block decomposition: positive part block
/// diagonal in the decomposition frame, singular values strictly inside
/// (tol, 1-tol), multiplicities divisible by each block's multiplicity, and
/// at most rank-many distinct values per block. Reports every failed clause;
/// never throws on well-formed input.
AchievabilityReport check_achievable(const TargetMeasurement& target,
                                     const BlockDecomposition& blocks, double tol);

/// Invert the per-slot endpoint map: find centers c_i such that the
/// normalized walk endpoint built from tanh flows reproduces the given
/// singular values at step delta and boundary X. Solved by bisection inside a
/// fixed-point iteration over the two normalization scales.
std::vector<double> centers_from_eigenvalues(const std::vector<double>& lambdas, double x_boundary,
                                             double delta,
                                             const Tolerances& tol = default_tolerances());

struct PolarPlan {
  UnitaryOperator w1, w2;
  HermitianOperator p1, p2;
};

/// Polar split M_i = W_i (M_i^dag M_i)^{1/2} with a deterministic unitary
/// completion on the kernel (canonical complement in index order).
PolarPlan polar_plan(const ComplexMatrix& m1, const ComplexMatrix& m2,
                     const Tolerances& tol = default_tolerances());

struct SynthesisResult {
  AchievabilityReport report;
  std::vector<double> centers;        // per diagonal slot of the schedule frame
  std::vector<double> target_values;  // singular values per slot
  std::vector<double> predicted;      // realized values per slot
  double roundtrip_error;
  ControlSchedule schedule;
  MeasurementPair realized;
  PolarPlan plan;
};

/// Full pipeline: achievability, centers, closed-form schedule, walk
/// roundtrip, polar plan. Throws NotAchievableError when the target fails
/// the achievability clauses.
SynthesisResult synthesize_schedule(const TargetMeasurement& target,
                                    const BlockDecomposition& blocks, double x_boundary,
                                    double delta,
                                    const Tolerances& tol = default_tolerances());

}  // namespace qmeas
