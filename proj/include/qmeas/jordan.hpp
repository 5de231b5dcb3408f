#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmeas/closure.hpp"

namespace qmeas {

/// The five matrix representations of simple Jordan algebras of Hermitian
/// type: real symmetric, complex Hermitian, and the real/complex embeddings
/// of complex and quaternionic Hermitian matrices.
enum class TypeTag { RealSym, ComplexHerm, ComplexInReal, QuatInComplex, QuatInReal };

std::string type_name(TypeTag t);

struct JordanBlock {
  std::vector<int> state_indices;  // contiguous rotated-basis indices
  TypeTag type = TypeTag::RealSym;
  int rank = 0;          // independent eigenvalue slots
  int multiplicity = 1;  // copies of each eigenvalue (1, 2, or 4)
  int algebra_dim = 0;   // dimension of the restricted span
  std::string warning;   // set when the (m, d) row is ambiguous
  int size() const { return rank * multiplicity; }
};

/// A unitary frame in which every element of the subspace is simultaneously
/// block diagonal, with one block per simple component.
struct BlockDecomposition {
  UnitaryOperator frame;
  std::vector<JordanBlock> blocks;
  int count() const { return static_cast<int>(blocks.size()); }
};

struct BlockClassification {
  TypeTag type;
  int rank;
  int multiplicity;
  bool ambiguous = false;
};

/// Identify (type, rank, multiplicity) from block size m and restricted
/// algebra dimension d. Ties resolve RealSym > ComplexHerm > ComplexInReal >
/// QuatInComplex > QuatInReal.
BlockClassification classify_block(int m, int d_block);

/// Split a closed subspace into its simple components: eigensplit a random
/// Hermitian element of the center (elements of the span commuting with the
/// whole span), recursing until each piece has trivial center.
BlockDecomposition block_decompose(const ClosedSubspace& v,
                                   const Tolerances& tol = default_tolerances(),
                                   std::uint64_t seed = 0x9E0FFEEULL);

/// Sum of block ranks: the number of independent eigenvalue slots the
/// decomposition can realize.
int spectrum_capacity(const BlockDecomposition& b);

}  // namespace qmeas
