#include "qmeas/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qmeas/errors.hpp"

namespace qmeas {

namespace {

HermitianOperator positive_part(const ComplexMatrix& m1) {
  HermitianOperator gram(ComplexMatrix(m1.adjoint() * m1));
  return scalar_function(gram, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

}  // namespace

AchievabilityReport check_achievable(const TargetMeasurement& target,
                                     const BlockDecomposition& blocks, double tol) {
  AchievabilityReport rep;
  rep.spectrum_count = spectrum_capacity(blocks);
  const int n = blocks.frame.dim();
  if (target.m1.rows() != n || target.m1.cols() != n)
    throw InputError("check_achievable: target dimension does not match decomposition");
  if (!target.m1.allFinite())
    throw InputError("check_achievable: non-finite target");

  HermitianOperator p = positive_part(target.m1);
  const ComplexMatrix& f = blocks.frame.matrix();
  ComplexMatrix rotated = f.adjoint() * p.matrix() * f;

  // Off-block mass: the diagonalizing frame must commute with the partition.
  {
    ComplexMatrix off = rotated;
    int base = 0;
    for (const auto& blk : blocks.blocks) {
      const int len = blk.size();
      off.block(base, base, len, len).setZero();
      base += len;
    }
    const double mass = off.norm();
    if (mass > 1e-8 * std::max(1.0, p.matrix().norm())) {
      std::ostringstream os;
      os << "positive part is not block diagonal in the decomposition frame (off-block mass "
         << mass << ")";
      rep.violations.push_back(os.str());
    }
  }

  int base = 0;
  for (std::size_t b = 0; b < blocks.blocks.size(); ++b) {
    const JordanBlock& blk = blocks.blocks[b];
    const int len = blk.size();
    ComplexMatrix sub = rotated.block(base, base, len, len);
    sub = 0.5 * (sub + sub.adjoint().eval());
    EigenSystem es = eigensystem(HermitianOperator(sub));
    // Group the block spectrum.
    const double gap = 1e-8 * std::max(1.0, es.eigenvalues.cwiseAbs().maxCoeff());
    int lo = 0;
    int groups = 0;
    while (lo < len) {
      int hi = lo + 1;
      while (hi < len && es.eigenvalues[hi] - es.eigenvalues[hi - 1] <= gap) ++hi;
      const int mult = hi - lo;
      const double value = es.eigenvalues.segment(lo, mult).mean();
      rep.block_assignment.push_back({static_cast<int>(b), value, mult});
      ++groups;
      if (mult % blk.multiplicity != 0) {
        std::ostringstream os;
        os << "block " << b << ": eigenvalue " << value << " has multiplicity " << mult
           << ", not a multiple of the block multiplicity " << blk.multiplicity;
        rep.violations.push_back(os.str());
      }
      if (value <= tol || value >= 1.0 - tol) {
        std::ostringstream os;
        os << "block " << b << ": eigenvalue " << value
           << " outside the open interval (" << tol << ", " << 1.0 - tol << ")";
        rep.violations.push_back(os.str());
      }
      lo = hi;
    }
    if (groups > blk.rank) {
      std::ostringstream os;
      os << "block " << b << ": " << groups << " distinct eigenvalues exceed the block rank "
         << blk.rank << " (spectrum capacity)";
      rep.violations.push_back(os.str());
    }
    base += len;
  }
  rep.achievable = rep.violations.empty();
  return rep;
}

namespace {

// Per-slot endpoint value of the unnormalized walk product for a single tanh
// flow with center c: product over sites j*delta of cos(delta d) -/+ sin.
double slot_product(double c, double x_boundary, double delta, int dir) {
  const double s = derive_scale().scale;
  const int steps = static_cast<int>(std::llround(x_boundary / delta));
  double log_sum = 0.0;
  for (int j = 0; j < steps; ++j) {
    const double d = s * std::tanh(dir * j * delta - c);
    const double f =
        dir > 0 ? std::cos(delta * d) - std::sin(delta * d) : std::cos(delta * d) + std::sin(delta * d);
    log_sum += std::log(f);
  }
  return std::exp(log_sum);
}

}  // namespace

std::vector<double> centers_from_eigenvalues(const std::vector<double>& lambdas, double x_boundary,
                                             double delta, const Tolerances& tol) {
  if (lambdas.empty()) throw InputError("centers_from_eigenvalues: no target values");
  const int steps = static_cast<int>(std::llround(x_boundary / delta));
  if (steps < 1 ||
      std::abs(x_boundary - steps * delta) > 1e-9 * std::max(1.0, x_boundary))
    throw InputError("centers_from_eigenvalues: boundary must be a multiple of delta");
  for (double l : lambdas)
    if (!(l > 0.0) || !(l < 1.0)) {
      std::ostringstream os;
      os << "centers_from_eigenvalues: target value " << l
         << " outside the open interval (0, 1)";
      throw NotAchievableError(os.str());
    }

  const double cap = tol.center_cap;
  const int m = static_cast<int>(lambdas.size());
  std::vector<double> centers(m, 0.0), mu(m), nu(m);
  double a = 1.0 / std::sqrt(2.0 * std::cosh(x_boundary));
  double b = a;

  for (int iter = 0; iter < 100; ++iter) {
    for (int i = 0; i < m; ++i) {
      const double want = lambdas[i] / a;
      // slot_product decreases in c.
      double lo = -cap, hi = cap;
      const double at_lo = slot_product(lo, x_boundary, delta, +1);
      const double at_hi = slot_product(hi, x_boundary, delta, +1);
      if (want > at_lo || want < at_hi) {
        std::ostringstream os;
        os << "centers_from_eigenvalues: target value " << lambdas[i]
           << " requires |c| > " << cap << " at X = " << x_boundary
           << " (achievable normalized range is [" << a * at_hi << ", " << a * at_lo
           << "])";
        throw NotAchievableError(os.str());
      }
      for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (slot_product(mid, x_boundary, delta, +1) > want)
          lo = mid;
        else
          hi = mid;
      }
      centers[i] = 0.5 * (lo + hi);
    }
    for (int i = 0; i < m; ++i) {
      mu[i] = slot_product(centers[i], x_boundary, delta, +1);
      nu[i] = slot_product(centers[i], x_boundary, delta, -1);
    }
    // Least squares for the normalization pair, matching endpoint_pair.
    double aa = 0, ab = 0, bb = 0, ra = 0, rb = 0;
    for (int i = 0; i < m; ++i) {
      const double m2 = mu[i] * mu[i], n2 = nu[i] * nu[i];
      aa += m2 * m2;
      ab += m2 * n2;
      bb += n2 * n2;
      ra += m2;
      rb += n2;
    }
    double u, v;
    const double det = aa * bb - ab * ab;
    if (det > 1e-12 * aa * bb) {
      u = (bb * ra - ab * rb) / det;
      v = (aa * rb - ab * ra) / det;
    } else {
      u = v = (ra + rb) / (aa + 2.0 * ab + bb);
    }
    if (!(u > 0.0) || !(v > 0.0))
      throw NumericalError("centers_from_eigenvalues: normalization went non-positive");
    const double a_new = std::sqrt(u), b_new = std::sqrt(v);
    const bool done = std::abs(a_new - a) <= 1e-14 && std::abs(b_new - b) <= 1e-14;
    a = a_new;
    b = b_new;
    if (done) return centers;
  }
  throw NumericalError("centers_from_eigenvalues: normalization fixed point did not converge");
}

PolarPlan polar_plan(const ComplexMatrix& m1, const ComplexMatrix& m2,
                     const Tolerances& tol) {
  if (m1.rows() != m1.cols() || m2.rows() != m2.cols() || m1.rows() != m2.rows())
    throw InputError("polar_plan: operators must be square and matching");
  const int n = static_cast<int>(m1.rows());
  const double completeness =
      (m1.adjoint() * m1 + m2.adjoint() * m2 - ComplexMatrix::Identity(n, n)).norm();
  if (completeness > tol.completeness) {
    std::ostringstream os;
    os << "polar_plan: completeness violated (residual " << completeness << ")";
    throw InputError(os.str());
  }

  auto split = [&](const ComplexMatrix& m) -> std::pair<UnitaryOperator, HermitianOperator> {
    HermitianOperator gram(ComplexMatrix(m.adjoint() * m));
    EigenSystem es = eigensystem(gram);
    const int dim = static_cast<int>(es.eigenvalues.size());
    Eigen::VectorXd sigma(dim);
    for (int i = 0; i < dim; ++i) sigma[i] = std::sqrt(std::max(es.eigenvalues[i], 0.0));
    const ComplexMatrix& v = es.frame.matrix();
    ComplexMatrix p = v * sigma.asDiagonal() * v.adjoint();
    p = 0.5 * (p + p.adjoint().eval());

    const double sig_max = sigma.maxCoeff();
    const double kernel_tol = 1e-12 * std::max(sig_max, 1.0);
    ComplexMatrix w_cols(dim, dim);
    std::vector<int> kernel_slots;
    std::vector<Eigen::VectorXcd> range;
    for (int i = 0; i < dim; ++i) {
      if (sigma[i] > kernel_tol) {
        Eigen::VectorXcd col = m * v.col(i) / sigma[i];
        for (const auto& r : range) col -= r.dot(col) * r;
        col.normalize();
        range.push_back(col);
        w_cols.col(i) = col;
      } else {
        kernel_slots.push_back(i);
      }
    }
    // Deterministic completion: canonical directions in index order.
    for (int slot : kernel_slots) {
      for (int j = 0; j < dim; ++j) {
        Eigen::VectorXcd cand = Eigen::VectorXcd::Zero(dim);
        cand[j] = 1.0;
        for (const auto& r : range) cand -= r.dot(cand) * r;
        const double nrm = cand.norm();
        if (nrm > 1e-6) {
          cand /= nrm;
          range.push_back(cand);
          w_cols.col(slot) = cand;
          break;
        }
      }
    }
    ComplexMatrix w = w_cols * v.adjoint();
    UnitaryOperator wu(w, tol);
    if ((w * p - m).norm() > 1e-8 * std::max(1.0, m.norm()))
      throw NumericalError("polar_plan: W P does not reproduce the operator");
    return {std::move(wu), HermitianOperator(std::move(p), tol)};
  };

  auto [w1, p1] = split(m1);
  auto [w2, p2] = split(m2);
  return PolarPlan{std::move(w1), std::move(w2), std::move(p1), std::move(p2)};
}

SynthesisResult synthesize_schedule(const TargetMeasurement& target,
                                    const BlockDecomposition& blocks, double x_boundary,
                                    double delta, const Tolerances& tol) {
  AchievabilityReport rep = check_achievable(target, blocks, target.tolerance);
  if (!rep.achievable) {
    std::string msg = "synthesize_schedule: target not achievable:";
    for (const auto& v : rep.violations) msg += "\n  - " + v;
    throw NotAchievableError(msg);
  }
  const int n = blocks.frame.dim();
  HermitianOperator p = positive_part(target.m1);
  const ComplexMatrix& f = blocks.frame.matrix();
  ComplexMatrix rotated = f.adjoint() * p.matrix() * f;

  // Per-block eigenframes give the schedule frame and the slot values.
  ComplexMatrix block_frames = ComplexMatrix::Zero(n, n);
  std::vector<double> slot_values(n);
  std::vector<int> block_sizes;
  int base = 0;
  for (const auto& blk : blocks.blocks) {
    const int len = blk.size();
    block_sizes.push_back(len);
    ComplexMatrix sub = rotated.block(base, base, len, len);
    sub = 0.5 * (sub + sub.adjoint().eval());
    EigenSystem es = eigensystem(HermitianOperator(sub));
    block_frames.block(base, base, len, len) = es.frame.matrix();
    for (int i = 0; i < len; ++i) slot_values[base + i] = es.eigenvalues[i];
    base += len;
  }

  std::vector<double> centers = centers_from_eigenvalues(slot_values, x_boundary, delta, tol);
  UnitaryOperator frame(ComplexMatrix(f * block_frames), tol);
  ControlSchedule schedule =
      ControlSchedule::closed_form(frame, centers, x_boundary, block_sizes);

  WalkOperators w = total_walk_operator(schedule, x_boundary, delta, tol);
  MeasurementPair realized = endpoint_pair(w, tol);
  std::vector<double> predicted(n);
  double err = 0.0;
  for (int i = 0; i < n; ++i) {
    predicted[i] = realized.a * w.n_diag_plus[i].real();
    err = std::max(err, std::abs(predicted[i] - slot_values[i]));
  }

  HermitianOperator m2 = scalar_function(
      HermitianOperator(ComplexMatrix(ComplexMatrix::Identity(n, n) -
                                      target.m1.adjoint() * target.m1)),
      [](double x) { return std::sqrt(std::max(x, 0.0)); });
  PolarPlan plan = polar_plan(target.m1, m2.matrix(), tol);

  return SynthesisResult{std::move(rep),       std::move(centers), std::move(slot_values),
                         std::move(predicted), err,                std::move(schedule),
                         std::move(realized),  std::move(plan)};
}

}  // namespace qmeas
