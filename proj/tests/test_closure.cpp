#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "qmeas/closure.hpp"
#include "qmeas/errors.hpp"

using namespace qmeas;
using namespace qmeas::testing;

namespace {

Eigen::MatrixXd span_proj(const std::vector<HermitianOperator>& basis, int n) {
  Eigen::MatrixXd v(n * n, static_cast<int>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i)
    v.col(static_cast<int>(i)) = hermitian_coords(basis[i].matrix());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
  const int rank = static_cast<int>(qr.rank());
  Eigen::MatrixXd q = Eigen::MatrixXd(qr.householderQ()).leftCols(rank);
  return q * q.transpose();
}

bool same_span(const std::vector<HermitianOperator>& a,
               const std::vector<HermitianOperator>& b, int n) {
  return (span_proj(a, n) - span_proj(b, n)).norm() < 1e-8;
}

QuadraticForm diag_form(std::initializer_list<double> d) {
  Eigen::VectorXd v(static_cast<int>(d.size()));
  int i = 0;
  for (double x : d) v[i++] = x;
  return QuadraticForm{Eigen::MatrixXd(v.asDiagonal())};
}

}  // namespace

TEST_CASE("witt decomposition of diag(1, -1)") {
  WittDecomposition w = witt_decompose(diag_form({1.0, -1.0}), 1e-9);
  CHECK(w.hyperbolic_count == 1);
  CHECK(w.null_basis.cols() == 0);
  CHECK(w.aniso_basis.cols() == 0);
}

TEST_CASE("witt decomposition of the zero form") {
  WittDecomposition w = witt_decompose(diag_form({0.0, 0.0}), 1e-9);
  CHECK(w.hyperbolic_count == 0);
  CHECK(w.null_basis.cols() == 2);
}

TEST_CASE("witt decomposition of a definite form has no isotropic directions") {
  WittDecomposition w = witt_decompose(diag_form({1.0, 1.0}), 1e-9);
  CHECK(w.hyperbolic_count == 0);
  CHECK(w.null_basis.cols() == 0);
  CHECK(w.aniso_basis.cols() == 2);
  CHECK(w.aniso_signs == std::vector<int>{1, 1});
}

TEST_CASE("isometry reproduces the canonical form") {
  SplitMix64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const int dim = 4;
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = rng.normal();
    QuadraticForm q{Eigen::MatrixXd(0.5 * (m + m.transpose()))};
    WittDecomposition w = witt_decompose(q, 1e-9);
    Eigen::MatrixXd canonical = w.isometry.transpose() * q.entries * w.isometry;
    // Expect diag(+1,-1 per plane, 0 per null, signs per aniso).
    Eigen::VectorXd expect(dim);
    int c = 0;
    for (int t = 0; t < w.hyperbolic_count; ++t) {
      expect[c++] = 1.0;
      expect[c++] = -1.0;
    }
    for (int t = 0; t < w.null_basis.cols(); ++t) expect[c++] = 0.0;
    for (int s : w.aniso_signs) expect[c++] = s;
    CHECK((canonical - Eigen::MatrixXd(expect.asDiagonal())).norm() < 1e-9);
  }
}

TEST_CASE("branches of a single hyperbolic plane are the coordinate axes") {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 1, 0;
  WittDecomposition w = witt_decompose(QuadraticForm{m}, 1e-9);
  REQUIRE(w.hyperbolic_count == 1);
  auto branches = isotropic_branches(w);
  REQUIRE(branches.size() == 2);
  for (const auto& b : branches) {
    REQUIRE(b.subspace_basis.cols() == 1);
    Eigen::VectorXd v = b.subspace_basis.col(0).normalized();
    const bool axis0 = std::abs(std::abs(v[0]) - 1.0) < 1e-12 && std::abs(v[1]) < 1e-12;
    const bool axis1 = std::abs(std::abs(v[1]) - 1.0) < 1e-12 && std::abs(v[0]) < 1e-12;
    CHECK((axis0 || axis1));
  }
  // The two branches differ.
  CHECK(std::abs(branches[0].subspace_basis.col(0).normalized().dot(
            branches[1].subspace_basis.col(0).normalized())) < 1e-12);
}

TEST_CASE("no hyperbolic planes gives exactly the nullspace branch") {
  WittDecomposition w = witt_decompose(diag_form({1.0, 0.0}), 1e-9);
  auto branches = isotropic_branches(w);
  REQUIRE(branches.size() == 1);
  CHECK(branches[0].signs.empty());
  CHECK(branches[0].subspace_basis.cols() == 1);
}

TEST_CASE("two planes give four branches annihilating the form") {
  Eigen::VectorXd d(4);
  d << 2.0, 1.0, -1.0, -2.0;
  QuadraticForm q{Eigen::MatrixXd(d.asDiagonal())};
  WittDecomposition w = witt_decompose(q, 1e-9);
  REQUIRE(w.hyperbolic_count == 2);
  auto branches = isotropic_branches(w);
  REQUIRE(branches.size() == 4);
  for (const auto& b : branches) {
    Eigen::MatrixXd g = b.subspace_basis.transpose() * q.entries * b.subspace_basis;
    CHECK(g.cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("branch cap raises a resource error") {
  Tolerances tol = default_tolerances();
  tol.branch_cap = 1;
  Eigen::VectorXd d(4);
  d << 2.0, 1.0, -1.0, -2.0;
  WittDecomposition w = witt_decompose(QuadraticForm{Eigen::MatrixXd(d.asDiagonal())}, 1e-9);
  CHECK_THROWS_AS(isotropic_branches(w, tol), ResourceError);
}

TEST_CASE("closure check accepts {I, X, Z} and rejects {I, XI, IX}") {
  std::vector<HermitianOperator> qubit{HermitianOperator(eye(2)),
                                       HermitianOperator(pauli_x()),
                                       HermitianOperator(pauli_z())};
  ClosureCheck a = closure_check(qubit, 1e-8);
  CHECK(a.closed);
  CHECK(a.residual < 1e-12);

  std::vector<HermitianOperator> two{HermitianOperator(eye(4)),
                                     HermitianOperator(kron(pauli_x(), eye(2))),
                                     HermitianOperator(kron(eye(2), pauli_x()))};
  ClosureCheck b = closure_check(two, 1e-8);
  CHECK_FALSE(b.closed);
  CHECK(b.residual > 0.1);
}

TEST_CASE("the identity alone is closed") {
  ClosureCheck c = closure_check({HermitianOperator(eye(3))}, 1e-8);
  CHECK(c.closed);
}

TEST_CASE("two-qubit transverse controls split into the two axis subspaces") {
  std::vector<HermitianOperator> controls{HermitianOperator(eye(4)),
                                          HermitianOperator(kron(pauli_x(), eye(2))),
                                          HermitianOperator(kron(eye(2), pauli_x()))};
  ClosureResult r = find_closed_subspaces(controls);
  REQUIRE(r.subspaces.size() == 2);
  std::vector<HermitianOperator> left{HermitianOperator(eye(4)),
                                      HermitianOperator(kron(pauli_x(), eye(2)))};
  std::vector<HermitianOperator> right{HermitianOperator(eye(4)),
                                       HermitianOperator(kron(eye(2), pauli_x()))};
  const bool found_left =
      same_span(r.subspaces[0].matrix_basis, left, 4) ||
      same_span(r.subspaces[1].matrix_basis, left, 4);
  const bool found_right =
      same_span(r.subspaces[0].matrix_basis, right, 4) ||
      same_span(r.subspaces[1].matrix_basis, right, 4);
  CHECK(found_left);
  CHECK(found_right);
  for (const auto& cs : r.subspaces) {
    CHECK(cs.dim() == 2);
    CHECK(cs.closure_residual < 1e-8);
    REQUIRE(cs.provenance.size() == 1);
    CHECK(cs.provenance[0].second.size() == 1);
  }
}

TEST_CASE("a closed input is returned unchanged") {
  std::vector<HermitianOperator> qubit{HermitianOperator(eye(2)),
                                       HermitianOperator(pauli_x()),
                                       HermitianOperator(pauli_z())};
  ClosureResult r = find_closed_subspaces(qubit);
  REQUIRE(r.subspaces.size() == 1);
  CHECK(same_span(r.subspaces[0].matrix_basis, qubit, 2));
  CHECK(r.subspaces[0].provenance.empty());
}

TEST_CASE("identity-only controls return the identity span") {
  ClosureResult r = find_closed_subspaces({HermitianOperator(eye(2))});
  REQUIRE(r.subspaces.size() == 1);
  CHECK(r.subspaces[0].dim() == 1);
}

TEST_CASE("random rotated partition-projector spans come back unchanged") {
  // Spans of rotated partition projectors (plus the identity) are closed:
  // projector products stay inside the partition algebra.
  SplitMix64 rng(83);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 3 + static_cast<int>(rng.next() % 2);
    ComplexMatrix u = random_unitary(rng, n);
    std::vector<int> group(n);
    const int groups = 2 + static_cast<int>(rng.next() % (n - 1));
    for (int i = 0; i < n; ++i) group[i] = static_cast<int>(rng.next() % groups);
    std::vector<HermitianOperator> controls;
    controls.emplace_back(eye(n));
    for (int g = 0; g < groups; ++g) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < n; ++i)
        if (group[i] == g) d[i] = 1.0;
      if (d.cwiseAbs().maxCoeff() == 0.0) continue;
      controls.emplace_back(ComplexMatrix(u * d.asDiagonal() * u.adjoint()));
    }
    ClosureResult r = find_closed_subspaces(controls);
    REQUIRE(r.subspaces.size() == 1);
    CHECK(same_span(r.subspaces[0].matrix_basis, controls, n));
  }
}

TEST_CASE("a non-closed diagonal subspace is cut down, not echoed") {
  // Two generic diagonals inside a 4-dim diagonal space do not span a closed
  // set; the search must restrict to genuine closed subspaces of it.
  SplitMix64 rng(84);
  const int n = 4;
  ComplexMatrix u = random_unitary(rng, n);
  std::vector<HermitianOperator> controls;
  controls.emplace_back(eye(n));
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = rng.normal();
    controls.emplace_back(ComplexMatrix(u * d.asDiagonal() * u.adjoint()));
  }
  REQUIRE_FALSE(closure_check(controls, 1e-8).closed);
  ClosureResult r = find_closed_subspaces(controls);
  Eigen::MatrixXd root = span_proj(controls, n);
  for (const auto& cs : r.subspaces) {
    CHECK(closure_check(cs.matrix_basis, 1e-8).closed);
    CHECK(cs.dim() < 3);
    Eigen::MatrixXd p = span_proj(cs.matrix_basis, n);
    CHECK((root * p - p).norm() < 1e-8);
  }
}

TEST_CASE("every result passes its own closure check and contains the identity") {
  SplitMix64 rng(97);
  std::vector<HermitianOperator> controls{HermitianOperator(eye(4)),
                                          HermitianOperator(kron(pauli_x(), eye(2))),
                                          HermitianOperator(kron(eye(2), pauli_y())),
                                          HermitianOperator(kron(pauli_z(), pauli_z()))};
  ClosureResult r = find_closed_subspaces(controls);
  CHECK(!r.subspaces.empty());
  Eigen::MatrixXd root = span_proj(controls, 4);
  for (const auto& cs : r.subspaces) {
    ClosureCheck cc = closure_check(cs.matrix_basis, 1e-8);
    CHECK(cc.closed);
    // Identity direction present.
    ComplexMatrix id_part = ComplexMatrix::Zero(4, 4);
    for (const auto& b : cs.matrix_basis)
      id_part += hs_inner(b.matrix(), eye(4)).real() * b.matrix();
    CHECK((id_part - eye(4)).norm() < 1e-8);
    // Span containment inside the root span.
    Eigen::MatrixXd p = span_proj(cs.matrix_basis, 4);
    CHECK((root * p - p).norm() < 1e-8);
  }
}

TEST_CASE("results are deterministic across runs") {
  std::vector<HermitianOperator> controls{HermitianOperator(eye(4)),
                                          HermitianOperator(kron(pauli_x(), eye(2))),
                                          HermitianOperator(kron(eye(2), pauli_x()))};
  ClosureResult a = find_closed_subspaces(controls);
  ClosureResult b = find_closed_subspaces(controls);
  REQUIRE(a.subspaces.size() == b.subspaces.size());
  for (std::size_t i = 0; i < a.subspaces.size(); ++i) {
    CHECK(a.subspaces[i].provenance == b.subspaces[i].provenance);
    for (std::size_t m = 0; m < a.subspaces[i].matrix_basis.size(); ++m)
      CHECK((a.subspaces[i].matrix_basis[m].matrix() -
             b.subspaces[i].matrix_basis[m].matrix())
                .norm() == 0.0);
  }
}

TEST_CASE("exhaustive mode covers the default results") {
  // Two independent off-span products: the default order explores one
  // constraint first, exhaustive branches over both.
  std::vector<HermitianOperator> controls{HermitianOperator(eye(4)),
                                          HermitianOperator(kron(pauli_x(), eye(2))),
                                          HermitianOperator(kron(pauli_y(), eye(2))),
                                          HermitianOperator(kron(eye(2), pauli_x()))};
  ClosureResult base = find_closed_subspaces(controls);
  ClosureOptions opts;
  opts.exhaustive = true;
  ClosureResult full = find_closed_subspaces(controls, default_tolerances(), opts);
  CHECK(full.nodes_explored >= base.nodes_explored);
  CHECK(full.subspaces.size() >= base.subspaces.size());
  Eigen::MatrixXd root = span_proj(controls, 4);
  for (const auto& cs : full.subspaces) {
    CHECK(closure_check(cs.matrix_basis, 1e-8).closed);
    Eigen::MatrixXd p = span_proj(cs.matrix_basis, 4);
    CHECK((root * p - p).norm() < 1e-8);
  }
  // every default result appears among the exhaustive ones
  for (const auto& a : base.subspaces) {
    bool found = false;
    for (const auto& b : full.subspaces)
      found = found || same_span(a.matrix_basis, b.matrix_basis, 4);
    CHECK(found);
  }
}

TEST_CASE("node cap raises a resource error") {
  Tolerances tol = default_tolerances();
  tol.node_cap = 1;
  std::vector<HermitianOperator> controls{HermitianOperator(eye(4)),
                                          HermitianOperator(kron(pauli_x(), eye(2))),
                                          HermitianOperator(kron(eye(2), pauli_x()))};
  CHECK_THROWS_AS(find_closed_subspaces(controls, tol), ResourceError);
}
