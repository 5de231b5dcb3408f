#include "qmeas/structure.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qmeas/errors.hpp"

namespace qmeas {

const ComplexMatrix& StructureTensor::element(int k) const {
  if (k <= d()) return controls[static_cast<std::size_t>(k)].matrix();
  return basis.elements[static_cast<std::size_t>(k)].matrix();
}

StructureTensor structure_tensor(const std::vector<HermitianOperator>& input,
                                 const Tolerances& tol) {
  if (input.empty()) throw InputError("structure_tensor: no controls");
  const int n = input.front().dim();
  for (const auto& c : input)
    if (c.dim() != n) throw InputError("structure_tensor: dimension mismatch");

  ComplexMatrix identity = ComplexMatrix::Identity(n, n);
  const double id_tol = 1e-12 * std::sqrt(static_cast<double>(n));
  std::vector<HermitianOperator> raw;
  raw.reserve(input.size() + 1);
  raw.emplace_back(identity, tol);
  for (const auto& c : input)
    if ((c.matrix() - identity).norm() > id_tol) raw.push_back(c);

  StructureTensor t;
  // Orthonormalize the controls, recording dropped dependents.
  {
    std::vector<ComplexMatrix> acc;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      ComplexMatrix v = raw[i].matrix();
      for (const auto& b : acc) v -= hs_inner(b, v).real() * b;
      const double nrm = v.norm();
      if (nrm > tol.gram_prune * std::max(raw[i].matrix().norm(), 1.0)) {
        acc.push_back(v / nrm);
        t.controls.push_back(raw[i]);
      } else {
        t.pruned.push_back(static_cast<int>(i));
      }
    }
    for (auto& b : acc) t.basis.elements.emplace_back(std::move(b), tol);
    t.basis.control_count = static_cast<int>(t.basis.elements.size());
    t.basis.pruned = t.pruned;
  }
  const int m = static_cast<int>(t.controls.size());

  // Complete the basis with the anticommutator directions first (so each
  // off-span product lands on a dedicated element), then canonical fill.
  {
    auto try_extend = [&](const ComplexMatrix& cand, double keep) {
      ComplexMatrix v = cand;
      for (const auto& b : t.basis.elements) v -= hs_inner(b.matrix(), v).real() * b.matrix();
      const double nrm = v.norm();
      if (nrm > keep) t.basis.elements.emplace_back(ComplexMatrix(v / nrm), tol);
    };
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j)
        try_extend(anticommutator(t.controls[i], t.controls[j]).matrix(), 1e-8);
    for (const auto& cand : canonical_hermitian_directions(n)) {
      if (t.basis.size() == n * n) break;
      try_extend(cand, 1e-6);
    }
    if (t.basis.size() != n * n)
      throw NumericalError("structure_tensor: basis completion did not reach n^2");
  }
  const int n2 = t.basis.size();

  // R[q][i]: coordinates of raw control i on the first m orthonormal elements.
  Eigen::MatrixXd r(m, m);
  for (int i = 0; i < m; ++i)
    for (int q = 0; q < m; ++q)
      r(q, i) = hs_inner(t.basis.elements[q].matrix(), t.controls[i].matrix()).real();
  t.control_in_basis = r;
  Eigen::MatrixXd r_inv = r.partialPivLu().solve(Eigen::MatrixXd::Identity(m, m));

  t.values.assign(static_cast<std::size_t>(m) * m * n2, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      HermitianOperator prod = anticommutator(t.controls[i], t.controls[j]);
      Eigen::VectorXd coeff(n2);
      for (int k = 0; k < n2; ++k)
        coeff[k] = hs_inner(t.basis.elements[k].matrix(), prod.matrix()).real();
      // Express the control-span part on the raw controls.
      Eigen::VectorXd head = r_inv * coeff.head(m);
      for (int k = 0; k < n2; ++k) {
        const double v = (k < m) ? head[k] : coeff[k];
        t.values[(static_cast<std::size_t>(i) * m + j) * n2 + k] = v;
        t.values[(static_cast<std::size_t>(j) * m + i) * n2 + k] = v;
      }
    }
  }

  // Reconstruction invariant.
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      ComplexMatrix rec = ComplexMatrix::Zero(n, n);
      for (int k = 0; k < n2; ++k) rec += t.value(i, j, k) * t.element(k);
      HermitianOperator prod = anticommutator(t.controls[i], t.controls[j]);
      const double dev = (rec - prod.matrix()).norm();
      if (dev > tol.gamma_reconstruction * std::max(1.0, prod.matrix().norm()))
        throw NumericalError("structure_tensor: reconstruction residual too large");
    }
  return t;
}

QuadraticForm control_form(const StructureTensor& t, int k) {
  if (k < 0 || k >= t.basis_size())
    throw InputError("control_form: basis index out of range");
  const int m = t.d() + 1;
  Eigen::MatrixXd q(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) q(i, j) = t.value(i, j, k);
  q = 0.5 * (q + q.transpose().eval());
  return QuadraticForm{std::move(q)};
}

double constraint_residual(const Eigen::VectorXd& p, const StructureTensor& t,
                           const std::vector<int>& keep) {
  const int m = t.d() + 1;
  if (p.size() != m) throw InputError("constraint_residual: |p| must be d+1");
  std::set<int> keep_set(keep.begin(), keep.end());
  double worst = 0.0;
  for (int k = 0; k < t.basis_size(); ++k) {
    if (keep_set.count(k)) continue;
    double s = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) s += p[i] * t.value(i, j, k) * p[j];
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

}  // namespace qmeas
