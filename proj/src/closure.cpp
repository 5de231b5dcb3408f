#include "qmeas/closure.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qmeas/errors.hpp"

namespace qmeas {

WittDecomposition witt_decompose(const QuadraticForm& q, double tol) {
  const Eigen::MatrixXd& m = q.entries;
  if (m.rows() != m.cols()) throw InputError("witt_decompose: form must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw InputError("witt_decompose: form must be symmetric");
  const int dim = static_cast<int>(m.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    throw NumericalError("witt_decompose: eigensolver failed");
  Eigen::VectorXd vals = solver.eigenvalues();
  Eigen::MatrixXd vecs = solver.eigenvectors();

  const double scale = vals.cwiseAbs().maxCoeff();
  const double cutoff = tol * scale;

  std::vector<int> neg, nul, pos;
  for (int i = 0; i < dim; ++i) {
    if (scale == 0.0 || std::abs(vals[i]) <= cutoff)
      nul.push_back(i);
    else if (vals[i] < 0)
      neg.push_back(i);
    else
      pos.push_back(i);
  }
  // Eigenvalues ascend, so neg[0] is the most negative and pos.back() the largest.
  const int planes = static_cast<int>(std::min(pos.size(), neg.size()));

  WittDecomposition w;
  w.hyperbolic_count = planes;
  w.isometry.resize(dim, dim);
  int col = 0;
  for (int t = 0; t < planes; ++t) {
    const int ip = pos[pos.size() - 1 - t];
    const int in = neg[t];
    w.isometry.col(col++) = vecs.col(ip) / std::sqrt(vals[ip]);
    w.isometry.col(col++) = vecs.col(in) / std::sqrt(-vals[in]);
  }
  w.null_basis.resize(dim, static_cast<int>(nul.size()));
  for (std::size_t i = 0; i < nul.size(); ++i) {
    w.null_basis.col(static_cast<int>(i)) = vecs.col(nul[i]);
    w.isometry.col(col++) = vecs.col(nul[i]);
  }
  const int surplus_pos = static_cast<int>(pos.size()) - planes;
  const int surplus_neg = static_cast<int>(neg.size()) - planes;
  w.aniso_basis.resize(dim, surplus_pos + surplus_neg);
  int acol = 0;
  for (int t = 0; t < surplus_pos; ++t) {
    const int ip = pos[pos.size() - 1 - planes - t];
    w.aniso_basis.col(acol) = vecs.col(ip) / std::sqrt(vals[ip]);
    w.aniso_signs.push_back(+1);
    w.isometry.col(col++) = w.aniso_basis.col(acol++);
  }
  for (int t = 0; t < surplus_neg; ++t) {
    const int in = neg[planes + t];
    w.aniso_basis.col(acol) = vecs.col(in) / std::sqrt(-vals[in]);
    w.aniso_signs.push_back(-1);
    w.isometry.col(col++) = w.aniso_basis.col(acol++);
  }
  return w;
}

std::vector<IsotropicBranch> isotropic_branches(const WittDecomposition& w,
                                                const Tolerances& tol) {
  const int planes = w.hyperbolic_count;
  if (planes > tol.branch_cap) {
    std::ostringstream os;
    os << "isotropic_branches: " << planes << " hyperbolic planes exceed cap "
       << tol.branch_cap;
    throw ResourceError(os.str());
  }
  const int z = static_cast<int>(w.null_basis.cols());
  const int dim = static_cast<int>(w.isometry.rows());
  std::vector<IsotropicBranch> out;
  out.reserve(static_cast<std::size_t>(1) << planes);
  for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << planes); ++mask) {
    IsotropicBranch b;
    b.signs.resize(planes);
    b.subspace_basis.resize(dim, planes + z);
    for (int t = 0; t < planes; ++t) {
      const int sign = (mask >> t) & 1 ? -1 : +1;
      b.signs[t] = sign;
      b.subspace_basis.col(t) =
          w.isometry.col(2 * t) + static_cast<double>(sign) * w.isometry.col(2 * t + 1);
    }
    for (int j = 0; j < z; ++j) b.subspace_basis.col(planes + j) = w.null_basis.col(j);
    out.push_back(std::move(b));
  }
  return out;
}

namespace {

// Orthonormalize with the identity direction forced to the front.
std::vector<HermitianOperator> orthonormal_span(const std::vector<ComplexMatrix>& gens,
                                                int n, double prune,
                                                const Tolerances& tol) {
  std::vector<ComplexMatrix> with_id;
  with_id.reserve(gens.size() + 1);
  with_id.push_back(ComplexMatrix::Identity(n, n));
  with_id.insert(with_id.end(), gens.begin(), gens.end());
  return orthonormalize_hermitian(with_id, prune, tol);
}

struct PairProducts {
  // Half-anticommutators of all basis pairs, and their off-span parts.
  std::vector<ComplexMatrix> products;   // (i <= j) in lexicographic order
  std::vector<ComplexMatrix> offspan;
  std::vector<double> offnorm;
  double residual = 0.0;
  int index(int i, int j, int r) const { return i * r - i * (i - 1) / 2 + (j - i); }
};

PairProducts pair_products(const std::vector<HermitianOperator>& basis) {
  const int r = static_cast<int>(basis.size());
  PairProducts pp;
  pp.products.reserve(r * (r + 1) / 2);
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) {
      ComplexMatrix p = 0.5 * (basis[i].matrix() * basis[j].matrix() +
                               basis[j].matrix() * basis[i].matrix());
      ComplexMatrix off = p;
      for (const auto& b : basis) off -= hs_inner(b.matrix(), off).real() * b.matrix();
      pp.offnorm.push_back(off.norm());
      pp.residual = std::max(pp.residual, off.norm());
      pp.products.push_back(std::move(p));
      pp.offspan.push_back(std::move(off));
    }
  return pp;
}

struct SearchState {
  const Tolerances& tol;
  const ClosureOptions& opts;
  std::vector<ClosedSubspace> emitted;
  int nodes = 0;
};

void search(const std::vector<HermitianOperator>& basis,
            std::vector<std::pair<int, std::vector<int>>> provenance, SearchState& st) {
  if (++st.nodes > st.tol.node_cap) {
    std::ostringstream os;
    os << "find_closed_subspaces: node cap " << st.tol.node_cap << " exceeded; "
       << st.emitted.size() << " partial results found";
    throw ResourceError(os.str());
  }
  const int n = basis.front().dim();
  PairProducts pp = pair_products(basis);
  if (pp.residual <= st.tol.closure) {
    ClosedSubspace cs;
    cs.matrix_basis = basis;
    cs.closure_residual = pp.residual;
    cs.provenance = std::move(provenance);
    st.emitted.push_back(std::move(cs));
    return;
  }

  // Completion elements spanning the violating products, in pair order.
  std::vector<ComplexMatrix> extensions;
  for (std::size_t t = 0; t < pp.offspan.size(); ++t) {
    if (pp.offnorm[t] <= st.tol.closure) continue;
    ComplexMatrix v = pp.offspan[t];
    for (const auto& e : extensions) v -= hs_inner(e, v).real() * e;
    const double nrm = v.norm();
    if (nrm > st.tol.closure) extensions.push_back(v / nrm);
  }

  const int r = static_cast<int>(basis.size());
  const int k_count = st.opts.exhaustive ? static_cast<int>(extensions.size()) : 1;
  for (int k = 0; k < k_count; ++k) {
    // Constraint form of completion element k over the current coordinates.
    Eigen::MatrixXd qm(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = i; j < r; ++j) {
        const double v =
            hs_inner(extensions[k], pp.products[pp.index(i, j, r)]).real();
        qm(i, j) = v;
        qm(j, i) = v;
      }
    WittDecomposition w = witt_decompose(QuadraticForm{qm}, st.tol.witt_null);
    for (const auto& branch : isotropic_branches(w, st.tol)) {
      std::vector<ComplexMatrix> gens;
      gens.reserve(branch.subspace_basis.cols());
      for (int c = 0; c < branch.subspace_basis.cols(); ++c) {
        ComplexMatrix g = ComplexMatrix::Zero(n, n);
        for (int m = 0; m < r; ++m) g += branch.subspace_basis(m, c) * basis[m].matrix();
        gens.push_back(std::move(g));
      }
      std::vector<HermitianOperator> sub =
          orthonormal_span(gens, n, st.tol.gram_prune, st.tol);
      auto prov = provenance;
      prov.emplace_back(r + k, branch.signs);
      search(sub, std::move(prov), st);
    }
  }
}

Eigen::MatrixXd span_projector(const ClosedSubspace& cs) {
  const int n = cs.matrix_basis.front().dim();
  Eigen::MatrixXd v(n * n, cs.dim());
  for (int i = 0; i < cs.dim(); ++i)
    v.col(i) = hermitian_coords(cs.matrix_basis[i].matrix());
  return v * v.transpose();
}

}  // namespace

ClosureCheck closure_check(const std::vector<HermitianOperator>& basis, double tol) {
  if (basis.empty()) throw InputError("closure_check: empty basis");
  std::vector<ComplexMatrix> gens;
  for (const auto& b : basis) gens.push_back(b.matrix());
  // Residuals are measured against the span, so non-orthonormal input is fine.
  std::vector<HermitianOperator> ortho =
      orthonormalize_hermitian(gens, 1e-12, default_tolerances());
  PairProducts pp = pair_products(ortho);
  return ClosureCheck{pp.residual <= tol, pp.residual};
}

ClosureResult find_closed_subspaces(const std::vector<HermitianOperator>& controls,
                                    const Tolerances& tol, const ClosureOptions& opts) {
  if (controls.empty()) throw InputError("find_closed_subspaces: no controls");
  const int n = controls.front().dim();
  for (const auto& c : controls)
    if (c.dim() != n) throw InputError("find_closed_subspaces: dimension mismatch");

  std::vector<ComplexMatrix> gens;
  for (const auto& c : controls) gens.push_back(c.matrix());
  std::vector<HermitianOperator> root = orthonormal_span(gens, n, tol.gram_prune, tol);

  SearchState st{tol, opts, {}, 0};
  search(root, {}, st);

  // Deduplicate by span projector, keeping first occurrences.
  std::vector<ClosedSubspace> unique;
  std::vector<Eigen::MatrixXd> projs;
  for (auto& cs : st.emitted) {
    Eigen::MatrixXd p = span_projector(cs);
    bool dup = false;
    for (const auto& q : projs)
      if ((p - q).norm() <= tol.dedup) {
        dup = true;
        break;
      }
    if (!dup) {
      projs.push_back(std::move(p));
      unique.push_back(std::move(cs));
    }
  }

  ClosureResult out;
  out.nodes_explored = st.nodes;
  for (std::size_t a = 0; a < unique.size(); ++a) {
    bool maximal = true;
    for (std::size_t b = 0; b < unique.size(); ++b) {
      if (a == b) continue;
      const bool a_in_b = (projs[b] * projs[a] - projs[a]).norm() <= tol.dedup;
      const bool b_in_a = (projs[a] * projs[b] - projs[b]).norm() <= tol.dedup;
      if (a_in_b && !b_in_a) {
        maximal = false;
        break;
      }
    }
    if (maximal)
      out.subspaces.push_back(unique[a]);
    else if (opts.keep_non_maximal)
      out.non_maximal.push_back(unique[a]);
  }
  return out;
}

}  // namespace qmeas
