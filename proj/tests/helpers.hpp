#pragma once

#include <Eigen/Dense>

#include "qmeas/matcore.hpp"
#include "qmeas/rng.hpp"

namespace qmeas::testing {

inline ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << cd(0, 0), cd(0, -1), cd(0, 1), cd(0, 0);
  return m;
}
inline ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
inline ComplexMatrix eye(int n) { return ComplexMatrix::Identity(n, n); }

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline ComplexMatrix random_hermitian(SplitMix64& rng, int n) {
  ComplexMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cd(rng.normal(), rng.normal());
  return 0.5 * (m + m.adjoint().eval());
}

inline ComplexMatrix random_unitary(SplitMix64& rng, int n) {
  ComplexMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cd(rng.normal(), rng.normal());
  Eigen::HouseholderQR<ComplexMatrix> qr(m);
  ComplexMatrix q = qr.householderQ();
  ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i)
    if (std::abs(r(i, i)) > 0) q.col(i) *= r(i, i) / std::abs(r(i, i));
  return q;
}

inline Eigen::VectorXcd random_state(SplitMix64& rng, int n) {
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = cd(rng.normal(), rng.normal());
  return v / v.norm();
}

}  // namespace qmeas::testing
