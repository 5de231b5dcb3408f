#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "qmeas/structure.hpp"

namespace qmeas {

/// The tanh-flow convention: d(x) = scale * tanh(x - c) satisfies
/// d' = 2 d^2 + alpha with unit argument slope. Matching a*tanh(b(x-c))
/// against the flow equation forces b = -2a and alpha = -2a^2; fixing b = 1
/// gives the signed values below.
struct FlowConvention {
  double scale;
  double alpha;
};
FlowConvention derive_scale();

/// Piecewise monotone cubic interpolant (Fritsch-Carlson slopes).
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;

 private:
  std::vector<double> x_, y_, d_;
};

/// A control trajectory: either a closed-form tanh eigenflow in a constant
/// frame, or a tabulated coefficient path over a fixed control set.
class ControlSchedule {
 public:
  enum class Kind { ClosedForm, Tabulated };

  static ControlSchedule closed_form(UnitaryOperator frame, std::vector<double> centers,
                                     double x_max, std::vector<int> block_sizes = {});
  static ControlSchedule tabulated(std::vector<double> grid,
                                   std::vector<Eigen::VectorXd> coefficients,
                                   std::vector<HermitianOperator> controls,
                                   std::vector<double> alpha_values);
  /// Constant operator as a degenerate tabulated schedule on [-x_max, x_max].
  static ControlSchedule constant(const HermitianOperator& h, double x_max);

  Kind kind() const { return kind_; }
  int dim() const;
  double x_min() const;
  double x_max() const;

  HermitianOperator evaluate(double x) const;
  double alpha_at(double x) const;

  // Closed-form accessors.
  const UnitaryOperator& frame() const;
  const std::vector<double>& centers() const;
  const std::vector<int>& block_sizes() const { return block_sizes_; }
  double scale() const { return scale_; }
  double alpha() const { return alpha_; }

  // Tabulated accessors.
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<Eigen::VectorXd>& coefficients() const { return coeffs_; }
  const std::vector<HermitianOperator>& controls() const { return controls_; }
  const std::vector<double>& alpha_values() const { return alpha_values_; }

 private:
  ControlSchedule() = default;
  void check_range(double x) const;

  Kind kind_ = Kind::ClosedForm;
  double range_lo_ = 0.0, range_hi_ = 0.0;
  // closed form
  std::vector<UnitaryOperator> frame_;  // empty or one element
  std::vector<double> centers_;
  std::vector<int> block_sizes_;
  double scale_ = 0.0, alpha_ = 0.0;
  // tabulated
  std::vector<double> grid_;
  std::vector<Eigen::VectorXd> coeffs_;
  std::vector<HermitianOperator> controls_;
  std::vector<double> alpha_values_;
  std::vector<MonotoneCubic> interp_;
  MonotoneCubic alpha_interp_;
};

struct OdeReport {
  double constraint_drift = 0.0;
  double step = 0.0;
  double order_estimate = 0.0;
};

struct Integration {
  ControlSchedule schedule;
  OdeReport report;
};

/// Integrate the control coefficients under the flow dp_k = 2 p^T T^(k) p
/// (alpha added to the identity component) with classical fourth-order
/// Runge-Kutta from range.first to range.second, p0 given at range.first.
/// Off-closure constraints are monitored at every grid point.
Integration integrate_controls(const Eigen::VectorXd& p0, const StructureTensor& t,
                               const std::vector<int>& closed_set,
                               std::pair<double, double> range, double h,
                               const std::function<double(double)>& alpha,
                               const Tolerances& tol = default_tolerances(),
                               bool estimate_order = true);

/// Convenience: integrate outward from x = 0 to both ends of [-x_max, x_max]
/// and merge into one tabulated schedule.
Integration integrate_symmetric(const Eigen::VectorXd& p0_at_zero, const StructureTensor& t,
                                const std::vector<int>& closed_set, double x_max, double h,
                                const std::function<double(double)>& alpha,
                                const Tolerances& tol = default_tolerances());

/// Frobenius norm of the traceless part of a backward-forward step pair at x,
/// maximized over the two orderings.
double reversibility_residual(const ControlSchedule& schedule, double x, double delta);

/// residual(delta) / residual(delta/2): 4 for generic schedules, larger for
/// flow solutions.
double reversibility_halving_ratio(const ControlSchedule& schedule, double x, double delta);

}  // namespace qmeas
