#include "qmeas/matcore.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "qmeas/errors.hpp"

namespace qmeas {

namespace {

void require_square_finite(const ComplexMatrix& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw InputError(std::string(who) + ": matrix must be square and nonempty");
  if (!m.allFinite()) throw InputError(std::string(who) + ": non-finite entries");
}

}  // namespace

HermitianOperator::HermitianOperator(ComplexMatrix m, const Tolerances& tol) {
  require_square_finite(m, "HermitianOperator");
  const double scale = m.cwiseAbs().maxCoeff();
  const double dev = (m - m.adjoint().eval()).cwiseAbs().maxCoeff();
  if (scale > 0.0 && dev > tol.hermiticity * scale) {
    std::ostringstream os;
    os << "HermitianOperator: |H - H^dag| = " << dev << " exceeds " << tol.hermiticity
       << " * max|H| = " << tol.hermiticity * scale;
    throw InputError(os.str());
  }
  m_ = 0.5 * (m + m.adjoint().eval());
}

UnitaryOperator::UnitaryOperator(ComplexMatrix m, const Tolerances& tol) {
  require_square_finite(m, "UnitaryOperator");
  const int n = static_cast<int>(m.rows());
  const double dev =
      (m.adjoint() * m - ComplexMatrix::Identity(n, n)).norm();
  if (dev > tol.unitarity * std::sqrt(static_cast<double>(n))) {
    std::ostringstream os;
    os << "UnitaryOperator: |U^dag U - I|_F = " << dev << " exceeds bound";
    throw InputError(os.str());
  }
  m_ = std::move(m);
}

HermitianOperator anticommutator(const HermitianOperator& a, const HermitianOperator& b) {
  if (a.dim() != b.dim()) throw InputError("anticommutator: dimension mismatch");
  ComplexMatrix p = 0.5 * (a.matrix() * b.matrix() + b.matrix() * a.matrix());
  return HermitianOperator(std::move(p));
}

namespace {

// Rotate the column so its first entry of significant magnitude is real > 0.
void fix_phase(Eigen::Ref<Eigen::VectorXcd> v) {
  const double mx = v.cwiseAbs().maxCoeff();
  if (mx <= 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-8 * mx) {
      cd phase = std::conj(v[i]) / std::abs(v[i]);
      v *= phase;
      return;
    }
  }
}

}  // namespace

EigenSystem eigensystem(const HermitianOperator& h, const Tolerances& tol) {
  const int n = h.dim();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h.matrix());
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eigensystem: solver failed to converge (n=" << n
       << ", |H|_F=" << h.matrix().norm() << ", cond proxy max|H|=" << h.matrix().cwiseAbs().maxCoeff()
       << ")";
    throw NumericalError(os.str());
  }
  Eigen::VectorXd vals = solver.eigenvalues();
  ComplexMatrix vecs = solver.eigenvectors();

  const double scale = std::max(h.matrix().norm(), 1e-300);
  const double gap = tol.eig_cluster * scale;

  // Canonicalize each degenerate cluster: project the standard basis vectors
  // onto the cluster span in index order and re-orthonormalize.
  int lo = 0;
  while (lo < n) {
    int hi = lo + 1;
    while (hi < n && vals[hi] - vals[hi - 1] <= gap) ++hi;
    const int k = hi - lo;
    if (k > 1) {
      ComplexMatrix v = vecs.middleCols(lo, k);
      ComplexMatrix proj = v * v.adjoint();  // projector onto the cluster span
      ComplexMatrix out(n, k);
      int filled = 0;
      for (int j = 0; j < n && filled < k; ++j) {
        Eigen::VectorXcd w = proj.col(j);
        for (int m = 0; m < filled; ++m) w -= out.col(m).dot(w) * out.col(m);
        const double nrm = w.norm();
        if (nrm > 1e-8) out.col(filled++) = w / nrm;
      }
      if (filled != k)
        throw NumericalError("eigensystem: degenerate cluster canonicalization failed");
      vecs.middleCols(lo, k) = out;
    }
    lo = hi;
  }
  for (int j = 0; j < n; ++j) fix_phase(vecs.col(j));

  UnitaryOperator frame(vecs, tol);
  const double recon =
      (vecs * vals.asDiagonal() * vecs.adjoint() - h.matrix()).norm();
  if (recon > tol.eig_reconstruction * std::max(h.matrix().norm(), 1.0))
    throw NumericalError("eigensystem: reconstruction residual too large");
  return EigenSystem{std::move(vals), std::move(frame)};
}

HermitianOperator scalar_function(const HermitianOperator& h,
                                  const std::function<double(double)>& f,
                                  const Tolerances& tol) {
  EigenSystem es = eigensystem(h, tol);
  Eigen::VectorXd fv(es.eigenvalues.size());
  for (Eigen::Index i = 0; i < fv.size(); ++i) {
    const double y = f(es.eigenvalues[i]);
    if (!std::isfinite(y)) {
      std::ostringstream os;
      os << "scalar_function: f undefined at eigenvalue " << es.eigenvalues[i];
      throw DomainError(os.str());
    }
    fv[i] = y;
  }
  const ComplexMatrix& u = es.frame.matrix();
  ComplexMatrix r = u * fv.asDiagonal() * u.adjoint();
  r = 0.5 * (r + r.adjoint().eval());
  return HermitianOperator(std::move(r), tol);
}

cd hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InputError("hs_inner: dimension mismatch");
  return (a.adjoint() * b).trace();
}

double frobenius(const ComplexMatrix& m) { return m.norm(); }

Eigen::VectorXd hermitian_coords(const ComplexMatrix& h) {
  const int n = static_cast<int>(h.rows());
  Eigen::VectorXd v(n * n);
  int idx = 0;
  for (int i = 0; i < n; ++i) v[idx++] = h(i, i).real();
  const double s = std::sqrt(2.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      v[idx++] = s * h(i, j).real();
      v[idx++] = s * h(i, j).imag();
    }
  return v;
}

ComplexMatrix hermitian_from_coords(const Eigen::VectorXd& v, int n) {
  ComplexMatrix h = ComplexMatrix::Zero(n, n);
  int idx = 0;
  for (int i = 0; i < n; ++i) h(i, i) = v[idx++];
  const double s = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double re = v[idx++] * s;
      const double im = v[idx++] * s;
      h(i, j) = cd(re, im);
      h(j, i) = cd(re, -im);
    }
  return h;
}

std::vector<ComplexMatrix> canonical_hermitian_directions(int n) {
  std::vector<ComplexMatrix> candidates;
  candidates.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    ComplexMatrix e = ComplexMatrix::Zero(n, n);
    e(i, i) = 1.0;
    candidates.push_back(std::move(e));
  }
  const double s = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      ComplexMatrix sym = ComplexMatrix::Zero(n, n);
      sym(i, j) = s;
      sym(j, i) = s;
      candidates.push_back(std::move(sym));
      ComplexMatrix asym = ComplexMatrix::Zero(n, n);
      asym(i, j) = cd(0.0, -s);
      asym(j, i) = cd(0.0, s);
      candidates.push_back(std::move(asym));
    }
  return candidates;
}

std::vector<HermitianOperator> orthonormalize_hermitian(
    const std::vector<ComplexMatrix>& gens, double prune, const Tolerances& tol) {
  std::vector<ComplexMatrix> acc;
  for (const auto& g : gens) {
    ComplexMatrix v = g;
    for (const auto& b : acc) v -= hs_inner(b, v).real() * b;
    const double nrm = v.norm();
    if (nrm > prune * std::max(g.norm(), 1.0)) acc.push_back(v / nrm);
  }
  std::vector<HermitianOperator> out;
  out.reserve(acc.size());
  for (auto& m : acc) out.emplace_back(std::move(m), tol);
  return out;
}

HermitianBasis complete_basis(const std::vector<HermitianOperator>& controls,
                              const Tolerances& tol) {
  if (controls.empty()) throw InputError("complete_basis: no controls");
  const int n = controls.front().dim();
  for (const auto& c : controls)
    if (c.dim() != n) throw InputError("complete_basis: dimension mismatch");

  HermitianBasis out;
  std::vector<ComplexMatrix> accepted;
  auto try_add = [&](const ComplexMatrix& cand, double prune_scale) -> bool {
    ComplexMatrix w = cand;
    // The inner product is real for Hermitian pairs; using the real part keeps
    // the orthogonalized element exactly Hermitian.
    for (const auto& b : accepted) w -= hs_inner(b, w).real() * b;
    const double nrm = w.norm();
    if (nrm <= prune_scale) return false;
    accepted.push_back(w / nrm);
    return true;
  };

  for (std::size_t i = 0; i < controls.size(); ++i) {
    const ComplexMatrix& c = controls[i].matrix();
    if (!try_add(c, tol.gram_prune * std::max(c.norm(), 1.0)))
      out.pruned.push_back(static_cast<int>(i));
  }
  out.control_count = static_cast<int>(accepted.size());

  for (const auto& cand : canonical_hermitian_directions(n)) {
    if (static_cast<int>(accepted.size()) == n * n) break;
    try_add(cand, 1e-6);
  }
  if (static_cast<int>(accepted.size()) != n * n)
    throw NumericalError("complete_basis: completion did not reach n^2 elements");

  out.elements.reserve(accepted.size());
  for (auto& m : accepted) out.elements.emplace_back(std::move(m), tol);
  return out;
}

}  // namespace qmeas
