#include "qmeas/jordan.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qmeas/errors.hpp"
#include "qmeas/rng.hpp"

namespace qmeas {

std::string type_name(TypeTag t) {
  switch (t) {
    case TypeTag::RealSym: return "real_symmetric";
    case TypeTag::ComplexHerm: return "complex_hermitian";
    case TypeTag::ComplexInReal: return "complex_in_real";
    case TypeTag::QuatInComplex: return "quaternion_in_complex";
    case TypeTag::QuatInReal: return "quaternion_in_real";
  }
  return "?";
}

BlockClassification classify_block(int m, int d_block) {
  if (m < 1 || d_block < 1) throw InputError("classify_block: m and d must be positive");
  struct Row {
    TypeTag tag;
    int div;  // m = div * n
    int (*dim)(int);
    int mult;
  };
  static const Row rows[] = {
      {TypeTag::RealSym, 1, [](int n) { return n * (n + 1) / 2; }, 1},
      {TypeTag::ComplexHerm, 1, [](int n) { return n * n; }, 1},
      {TypeTag::ComplexInReal, 2, [](int n) { return n * n; }, 2},
      {TypeTag::QuatInComplex, 2, [](int n) { return n * (2 * n - 1); }, 2},
      {TypeTag::QuatInReal, 4, [](int n) { return n * (2 * n - 1); }, 4},
  };
  std::vector<BlockClassification> matches;
  for (const Row& r : rows) {
    if (m % r.div != 0) continue;
    const int n = m / r.div;
    if (r.dim(n) == d_block) matches.push_back({r.tag, n, r.mult, false});
  }
  if (matches.empty()) {
    std::ostringstream os;
    os << "classify_block: no Jordan type matches block size m=" << m
       << " with algebra dimension d=" << d_block;
    throw NumericalError(os.str());
  }
  BlockClassification best = matches.front();
  for (const auto& alt : matches)
    if (alt.multiplicity != best.multiplicity) best.ambiguous = true;
  return best;
}

namespace {

// Orthonormal coordinates basis of the center of span(C): all real
// combinations commuting with every element.
std::vector<Eigen::VectorXd> center_coords(const std::vector<ComplexMatrix>& c,
                                           double rank_tol) {
  const int r = static_cast<int>(c.size());
  const int m = static_cast<int>(c.front().rows());
  Eigen::MatrixXd a(2 * m * m * r, r);
  for (int col = 0; col < r; ++col) {
    int row = 0;
    for (int i = 0; i < r; ++i) {
      ComplexMatrix comm = c[col] * c[i] - c[i] * c[col];
      for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q) {
          a(row++, col) = comm(p, q).real();
          a(row++, col) = comm(p, q).imag();
        }
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = rank_tol * std::max(sv.size() ? sv[0] : 0.0, 1.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) ++rank;
  std::vector<Eigen::VectorXd> out;
  for (int i = rank; i < r; ++i) out.push_back(svd.matrixV().col(i));
  return out;
}

std::vector<ComplexMatrix> restrict_basis(const std::vector<ComplexMatrix>& c,
                                          const ComplexMatrix& cols, double prune) {
  std::vector<ComplexMatrix> acc;
  for (const auto& ci : c) {
    ComplexMatrix v = cols.adjoint() * ci * cols;
    v = 0.5 * (v + v.adjoint().eval());
    for (const auto& b : acc) v -= (b.adjoint() * v).trace().real() * b;
    const double nrm = v.norm();
    if (nrm > prune) acc.push_back(v / nrm);
  }
  return acc;
}

// Recursive central split. Returns the local frame (m x m) and block sizes in
// frame-column order; basis elements are orthonormal m x m Hermitian matrices.
void central_split(const std::vector<ComplexMatrix>& c, const Tolerances& tol,
                   SplitMix64& rng, ComplexMatrix& frame, std::vector<int>& sizes,
                   std::vector<int>& dims) {
  const int m = static_cast<int>(c.front().rows());
  std::vector<Eigen::VectorXd> centre = center_coords(c, 1e-10);
  if (centre.empty())
    throw NumericalError("block_decompose: commutation system lost the identity");
  if (centre.size() == 1) {
    frame = ComplexMatrix::Identity(m, m);
    sizes = {m};
    dims = {static_cast<int>(c.size())};
    return;
  }

  for (int attempt = 0; attempt < 5; ++attempt) {
    ComplexMatrix z = ComplexMatrix::Zero(m, m);
    for (const auto& coord : centre) {
      const double g = rng.normal();
      for (int i = 0; i < static_cast<int>(c.size()); ++i) z += g * coord[i] * c[i];
    }
    EigenSystem es = eigensystem(HermitianOperator(z, tol), tol);
    // Cluster the spectrum of the probe.
    const double gap = 1e-8 * std::max(es.eigenvalues.cwiseAbs().maxCoeff(), 1.0);
    std::vector<std::pair<int, int>> clusters;
    int lo = 0;
    while (lo < m) {
      int hi = lo + 1;
      while (hi < m && es.eigenvalues[hi] - es.eigenvalues[hi - 1] <= gap) ++hi;
      clusters.emplace_back(lo, hi - lo);
      lo = hi;
    }
    if (clusters.size() < 2) continue;  // degenerate draw, retry

    frame = ComplexMatrix::Zero(m, m);
    sizes.clear();
    dims.clear();
    int out_col = 0;
    for (const auto& [start, len] : clusters) {
      ComplexMatrix cols = es.frame.matrix().middleCols(start, len);
      std::vector<ComplexMatrix> sub = restrict_basis(c, cols, 1e-10);
      ComplexMatrix sub_frame;
      std::vector<int> sub_sizes, sub_dims;
      central_split(sub, tol, rng, sub_frame, sub_sizes, sub_dims);
      frame.middleCols(out_col, len) = cols * sub_frame;
      out_col += len;
      sizes.insert(sizes.end(), sub_sizes.begin(), sub_sizes.end());
      dims.insert(dims.end(), sub_dims.begin(), sub_dims.end());
    }
    return;
  }
  throw NumericalError("block_decompose: central probe failed to split after 5 draws");
}

}  // namespace

BlockDecomposition block_decompose(const ClosedSubspace& v, const Tolerances& tol,
                                   std::uint64_t seed) {
  if (v.matrix_basis.empty()) throw InputError("block_decompose: empty subspace");
  ClosureCheck cc = closure_check(v.matrix_basis, tol.closure);
  if (!cc.closed) {
    std::ostringstream os;
    os << "block_decompose: input is not closed under anticommutation (residual "
       << cc.residual << ")";
    throw InputError(os.str());
  }
  const int n = v.matrix_basis.front().dim();
  std::vector<ComplexMatrix> gens;
  for (const auto& b : v.matrix_basis) gens.push_back(b.matrix());
  std::vector<ComplexMatrix> c;
  for (const auto& b : orthonormalize_hermitian(gens, 1e-10, tol)) c.push_back(b.matrix());

  SplitMix64 rng(seed);
  ComplexMatrix frame;
  std::vector<int> sizes, dims;
  central_split(c, tol, rng, frame, sizes, dims);

  const int total_dim = std::accumulate(dims.begin(), dims.end(), 0);
  if (total_dim != static_cast<int>(c.size())) {
    std::ostringstream os;
    os << "block_decompose: restricted dimensions sum to " << total_dim
       << ", expected " << c.size() << " (rank decision failed)";
    throw NumericalError(os.str());
  }

  // Order blocks by the smallest original basis index they carry weight on.
  const int nb = static_cast<int>(sizes.size());
  std::vector<int> offsets(nb, 0);
  for (int b = 1; b < nb; ++b) offsets[b] = offsets[b - 1] + sizes[b - 1];
  std::vector<int> owner(n, -1);
  for (int j = 0; j < n; ++j) {
    double best = -1.0;
    for (int b = 0; b < nb; ++b) {
      double mass = 0.0;
      for (int t = 0; t < sizes[b]; ++t) mass += std::norm(frame(j, offsets[b] + t));
      if (mass > best) {
        best = mass;
        owner[j] = b;
      }
    }
  }
  std::vector<int> order;
  for (int j = 0; j < n; ++j)
    if (owner[j] >= 0 && std::find(order.begin(), order.end(), owner[j]) == order.end())
      order.push_back(owner[j]);
  for (int b = 0; b < nb; ++b)
    if (std::find(order.begin(), order.end(), b) == order.end()) order.push_back(b);

  ComplexMatrix perm_frame(n, n);
  BlockDecomposition out{UnitaryOperator(ComplexMatrix::Identity(n, n), tol), {}};
  int col = 0;
  for (int b : order) {
    JordanBlock blk;
    BlockClassification cls = classify_block(sizes[b], dims[b]);
    blk.type = cls.type;
    blk.rank = cls.rank;
    blk.multiplicity = cls.multiplicity;
    blk.algebra_dim = dims[b];
    if (cls.ambiguous) {
      std::ostringstream os;
      os << "ambiguous classification for m=" << sizes[b] << ", d=" << dims[b]
         << "; preference order applied";
      blk.warning = os.str();
    }
    for (int t = 0; t < sizes[b]; ++t) {
      perm_frame.col(col) = frame.col(offsets[b] + t);
      blk.state_indices.push_back(col++);
    }
    out.blocks.push_back(std::move(blk));
  }
  out.frame = UnitaryOperator(perm_frame, tol);

  // Verify block diagonality of every rotated basis element.
  for (const auto& ci : c) {
    ComplexMatrix r = perm_frame.adjoint() * ci * perm_frame;
    double off = 0.0;
    int base = 0;
    for (int b = 0; b < nb; ++b) {
      const int len = static_cast<int>(out.blocks[b].state_indices.size());
      r.block(base, base, len, len).setZero();
      base += len;
    }
    off = r.norm();
    if (off > tol.block_offdiag)
      throw NumericalError("block_decompose: rotated basis is not block diagonal");
  }
  return out;
}

int spectrum_capacity(const BlockDecomposition& b) {
  int cap = 0;
  for (const auto& blk : b.blocks) cap += blk.rank;
  return cap;
}

}  // namespace qmeas
