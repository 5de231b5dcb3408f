#include "qmeas/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qmeas/errors.hpp"
#include "qmeas/walk.hpp"

namespace qmeas {

FlowConvention derive_scale() {
  // a*tanh(b(x-c)) solves d' = 2d^2 + alpha iff b = -2a, alpha = ab.
  // With b = 1: a = -1/2, alpha = -1/2.
  return FlowConvention{-0.5, -0.5};
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const int n = static_cast<int>(x_.size());
  if (n == 0 || x_.size() != y_.size())
    throw InputError("MonotoneCubic: empty or mismatched data");
  for (int i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw InputError("MonotoneCubic: grid must strictly increase");
  d_.assign(n, 0.0);
  if (n == 1) return;
  std::vector<double> h(n - 1), s(n - 1);
  for (int i = 0; i < n - 1; ++i) {
    h[i] = x_[i + 1] - x_[i];
    s[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  if (n == 2) {
    d_[0] = d_[1] = s[0];
    return;
  }
  for (int i = 1; i < n - 1; ++i) {
    if (s[i - 1] * s[i] <= 0.0) {
      d_[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
    }
  }
  auto endpoint = [](double h0, double h1, double s0, double s1) {
    double d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if (d * s0 <= 0.0) return 0.0;
    if (s0 * s1 <= 0.0 && std::abs(d) > 3.0 * std::abs(s0)) return 3.0 * s0;
    return d;
  };
  d_[0] = endpoint(h[0], h[1], s[0], s[1]);
  d_[n - 1] = endpoint(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
}

double MonotoneCubic::operator()(double x) const {
  const int n = static_cast<int>(x_.size());
  if (n == 1) return y_[0];
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  int i = static_cast<int>(it - x_.begin()) - 1;
  i = std::clamp(i, 0, n - 2);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return y_[i] * (2 * t3 - 3 * t2 + 1) + h * d_[i] * (t3 - 2 * t2 + t) +
         y_[i + 1] * (-2 * t3 + 3 * t2) + h * d_[i + 1] * (t3 - t2);
}

ControlSchedule ControlSchedule::closed_form(UnitaryOperator frame,
                                             std::vector<double> centers, double x_max,
                                             std::vector<int> block_sizes) {
  if (static_cast<int>(centers.size()) != frame.dim())
    throw InputError("ControlSchedule: one center per diagonal slot required");
  if (!(x_max > 0.0)) throw InputError("ControlSchedule: x_max must be positive");
  ControlSchedule s;
  s.kind_ = Kind::ClosedForm;
  s.range_lo_ = -x_max;
  s.range_hi_ = x_max;
  s.frame_.push_back(std::move(frame));
  s.centers_ = std::move(centers);
  s.block_sizes_ = std::move(block_sizes);
  const FlowConvention fc = derive_scale();
  s.scale_ = fc.scale;
  s.alpha_ = fc.alpha;
  return s;
}

ControlSchedule ControlSchedule::tabulated(std::vector<double> grid,
                                           std::vector<Eigen::VectorXd> coefficients,
                                           std::vector<HermitianOperator> controls,
                                           std::vector<double> alpha_values) {
  if (grid.size() < 2) throw InputError("ControlSchedule: tabulated grid needs >= 2 points");
  if (coefficients.size() != grid.size())
    throw InputError("ControlSchedule: one coefficient vector per grid point");
  if (controls.empty()) throw InputError("ControlSchedule: no controls");
  const int m = static_cast<int>(controls.size());
  for (const auto& c : coefficients)
    if (c.size() != m) throw InputError("ControlSchedule: coefficient size mismatch");
  if (alpha_values.empty()) alpha_values.assign(grid.size(), 0.0);
  if (alpha_values.size() != grid.size())
    throw InputError("ControlSchedule: alpha sample per grid point required");

  ControlSchedule s;
  s.kind_ = Kind::Tabulated;
  s.range_lo_ = grid.front();
  s.range_hi_ = grid.back();
  s.grid_ = std::move(grid);
  s.coeffs_ = std::move(coefficients);
  s.controls_ = std::move(controls);
  s.alpha_values_ = std::move(alpha_values);
  s.interp_.reserve(m);
  for (int i = 0; i < m; ++i) {
    std::vector<double> yi(s.grid_.size());
    for (std::size_t j = 0; j < s.grid_.size(); ++j) yi[j] = s.coeffs_[j][i];
    s.interp_.emplace_back(s.grid_, std::move(yi));
  }
  s.alpha_interp_ = MonotoneCubic(s.grid_, s.alpha_values_);
  return s;
}

ControlSchedule ControlSchedule::constant(const HermitianOperator& h, double x_max) {
  std::vector<double> grid{-x_max, 0.0, x_max};
  Eigen::VectorXd one(1);
  one << 1.0;
  return tabulated(grid, {one, one, one}, {h}, {0.0, 0.0, 0.0});
}

int ControlSchedule::dim() const {
  return kind_ == Kind::ClosedForm ? frame_.front().dim() : controls_.front().dim();
}

double ControlSchedule::x_min() const { return range_lo_; }
double ControlSchedule::x_max() const { return range_hi_; }

const UnitaryOperator& ControlSchedule::frame() const {
  if (kind_ != Kind::ClosedForm) throw InputError("ControlSchedule: not closed form");
  return frame_.front();
}
const std::vector<double>& ControlSchedule::centers() const {
  if (kind_ != Kind::ClosedForm) throw InputError("ControlSchedule: not closed form");
  return centers_;
}

void ControlSchedule::check_range(double x) const {
  const double slack = 1e-9 * std::max(1.0, std::abs(range_hi_));
  if (x < range_lo_ - slack || x > range_hi_ + slack) {
    std::ostringstream os;
    os << "ControlSchedule: x = " << x << " outside [" << range_lo_ << ", " << range_hi_
       << "]";
    throw InputError(os.str());
  }
}

HermitianOperator ControlSchedule::evaluate(double x) const {
  check_range(x);
  if (kind_ == Kind::ClosedForm) {
    const int n = dim();
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = scale_ * std::tanh(x - centers_[i]);
    const ComplexMatrix& u = frame_.front().matrix();
    ComplexMatrix e = u * d.asDiagonal() * u.adjoint();
    e = 0.5 * (e + e.adjoint().eval());
    return HermitianOperator(std::move(e));
  }
  const int n = dim();
  ComplexMatrix e = ComplexMatrix::Zero(n, n);
  for (std::size_t i = 0; i < controls_.size(); ++i)
    e += interp_[i](x) * controls_[i].matrix();
  return HermitianOperator(std::move(e));
}

double ControlSchedule::alpha_at(double x) const {
  check_range(x);
  if (kind_ == Kind::ClosedForm) return alpha_;
  return alpha_interp_(x);
}

namespace {

struct FlowSystem {
  std::vector<Eigen::MatrixXd> control_forms;     // k = 0..d
  std::vector<Eigen::MatrixXd> constraint_forms;  // k not in closed_set
  std::vector<int> constraint_ids;

  Eigen::VectorXd rhs(double x, const Eigen::VectorXd& p,
                      const std::function<double(double)>& alpha) const {
    const int m = static_cast<int>(control_forms.size());
    Eigen::VectorXd f(m);
    for (int k = 0; k < m; ++k) f[k] = 2.0 * p.dot(control_forms[k] * p);
    if (alpha) f[0] += alpha(x);
    return f;
  }
  double worst_constraint(const Eigen::VectorXd& p) const {
    double worst = 0.0;
    for (const auto& q : constraint_forms)
      worst = std::max(worst, std::abs(p.dot(q * p)));
    return worst;
  }
};

struct RawPath {
  std::vector<double> xs;
  std::vector<Eigen::VectorXd> ps;
  double drift = 0.0;
};

RawPath rk4_path(const FlowSystem& sys, const Eigen::VectorXd& p0, double x_a, double x_b,
                 int steps, const std::function<double(double)>& alpha,
                 const Tolerances& tol) {
  RawPath out;
  const double h = (x_b - x_a) / steps;
  Eigen::VectorXd p = p0;
  out.xs.push_back(x_a);
  out.ps.push_back(p);
  for (int j = 0; j < steps; ++j) {
    const double x = x_a + j * h;
    Eigen::VectorXd k1 = sys.rhs(x, p, alpha);
    Eigen::VectorXd k2 = sys.rhs(x + 0.5 * h, p + 0.5 * h * k1, alpha);
    Eigen::VectorXd k3 = sys.rhs(x + 0.5 * h, p + 0.5 * h * k2, alpha);
    Eigen::VectorXd k4 = sys.rhs(x + h, p + h * k3, alpha);
    p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double xn = x_a + (j + 1) * h;
    if (!p.allFinite() || p.cwiseAbs().maxCoeff() > tol.blowup) {
      std::ostringstream os;
      os << "integrate_controls: solution blew up near x = " << xn;
      throw SimulationError(os.str());
    }
    const double c = sys.worst_constraint(p);
    if (c > tol.constraint_drift) {
      std::ostringstream os;
      os << "integrate_controls: constraint drift " << c << " at x = " << xn;
      throw SimulationError(os.str());
    }
    out.drift = std::max(out.drift, c);
    out.xs.push_back(xn);
    out.ps.push_back(p);
  }
  return out;
}

FlowSystem build_system(const StructureTensor& t, const std::vector<int>& closed_set) {
  FlowSystem sys;
  const int m = t.d() + 1;
  for (int k = 0; k < m; ++k) sys.control_forms.push_back(control_form(t, k).entries);
  std::vector<char> keep(t.basis_size(), 0);
  for (int k : closed_set)
    if (k >= 0 && k < t.basis_size()) keep[k] = 1;
  for (int k = 0; k < t.basis_size(); ++k) {
    if (keep[k]) continue;
    sys.constraint_forms.push_back(control_form(t, k).entries);
    sys.constraint_ids.push_back(k);
  }
  return sys;
}

}  // namespace

Integration integrate_controls(const Eigen::VectorXd& p0, const StructureTensor& t,
                               const std::vector<int>& closed_set,
                               std::pair<double, double> range, double h,
                               const std::function<double(double)>& alpha,
                               const Tolerances& tol, bool estimate_order) {
  const int m = t.d() + 1;
  if (p0.size() != m) throw InputError("integrate_controls: |p0| must be d+1");
  if (!(h > 0.0)) throw InputError("integrate_controls: h must be positive");
  if (range.second == range.first)
    throw InputError("integrate_controls: empty integration range");
  if (constraint_residual(p0, t, closed_set) > 1e-8)
    throw InputError("integrate_controls: p0 violates the closure constraints");

  FlowSystem sys = build_system(t, closed_set);
  const double span = std::abs(range.second - range.first);
  const int steps = std::max(1, static_cast<int>(std::ceil(span / h - 1e-12)));
  RawPath path = rk4_path(sys, p0, range.first, range.second, steps, alpha, tol);

  OdeReport report;
  report.constraint_drift = path.drift;
  report.step = (range.second - range.first) / steps;
  report.order_estimate = 0.0;
  if (estimate_order) {
    RawPath p2 = rk4_path(sys, p0, range.first, range.second, 2 * steps, alpha, tol);
    RawPath p4 = rk4_path(sys, p0, range.first, range.second, 4 * steps, alpha, tol);
    const double e1 = (path.ps.back() - p2.ps.back()).cwiseAbs().maxCoeff();
    const double e2 = (p2.ps.back() - p4.ps.back()).cwiseAbs().maxCoeff();
    const double floor_ = 1e-14 * std::max(1.0, path.ps.back().cwiseAbs().maxCoeff());
    report.order_estimate = (e2 > floor_) ? std::log2(e1 / e2) : 4.0;
  }

  // Ascending grid regardless of integration direction.
  std::vector<double> xs = path.xs;
  std::vector<Eigen::VectorXd> ps = path.ps;
  if (xs.back() < xs.front()) {
    std::reverse(xs.begin(), xs.end());
    std::reverse(ps.begin(), ps.end());
  }
  std::vector<double> alpha_samples(xs.size(), 0.0);
  if (alpha)
    for (std::size_t i = 0; i < xs.size(); ++i) alpha_samples[i] = alpha(xs[i]);

  std::vector<HermitianOperator> controls = t.controls;
  return Integration{
      ControlSchedule::tabulated(std::move(xs), std::move(ps), std::move(controls),
                                 std::move(alpha_samples)),
      report};
}

Integration integrate_symmetric(const Eigen::VectorXd& p0_at_zero, const StructureTensor& t,
                                const std::vector<int>& closed_set, double x_max, double h,
                                const std::function<double(double)>& alpha,
                                const Tolerances& tol) {
  Integration fwd =
      integrate_controls(p0_at_zero, t, closed_set, {0.0, x_max}, h, alpha, tol, true);
  Integration bwd =
      integrate_controls(p0_at_zero, t, closed_set, {0.0, -x_max}, h, alpha, tol, false);

  std::vector<double> xs(bwd.schedule.grid());
  std::vector<Eigen::VectorXd> ps(bwd.schedule.coefficients());
  const auto& fx = fwd.schedule.grid();
  const auto& fp = fwd.schedule.coefficients();
  for (std::size_t i = 1; i < fx.size(); ++i) {
    xs.push_back(fx[i]);
    ps.push_back(fp[i]);
  }
  std::vector<double> alpha_samples(xs.size(), 0.0);
  if (alpha)
    for (std::size_t i = 0; i < xs.size(); ++i) alpha_samples[i] = alpha(xs[i]);

  OdeReport report;
  report.constraint_drift = std::max(fwd.report.constraint_drift, bwd.report.constraint_drift);
  report.step = fwd.report.step;
  report.order_estimate = fwd.report.order_estimate;
  std::vector<HermitianOperator> controls = t.controls;
  return Integration{
      ControlSchedule::tabulated(std::move(xs), std::move(ps), std::move(controls),
                                 std::move(alpha_samples)),
      report};
}

double reversibility_residual(const ControlSchedule& schedule, double x, double delta) {
  if (delta == 0.0) return 0.0;
  const int n = schedule.dim();
  double worst = 0.0;
  for (int dir = 0; dir < 2; ++dir) {
    const double sgn = dir == 0 ? +1.0 : -1.0;
    HermitianOperator e1 = schedule.evaluate(x);
    HermitianOperator e2 = schedule.evaluate(x + sgn * delta);
    auto [p1, m1] = step_operators(e1, delta);
    auto [p2, m2] = step_operators(e2, delta);
    ComplexMatrix prod = (dir == 0) ? ComplexMatrix(m2 * p1) : ComplexMatrix(p2 * m1);
    prod -= (prod.trace() / static_cast<double>(n)) * ComplexMatrix::Identity(n, n);
    worst = std::max(worst, prod.norm());
  }
  return worst;
}

double reversibility_halving_ratio(const ControlSchedule& schedule, double x, double delta) {
  const double r1 = reversibility_residual(schedule, x, delta);
  const double r2 = reversibility_residual(schedule, x, 0.5 * delta);
  if (r2 == 0.0) throw NumericalError("reversibility_halving_ratio: zero residual");
  return r1 / r2;
}

}  // namespace qmeas
