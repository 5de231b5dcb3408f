#pragma once

#include <complex>
#include <string>

// Data-parallel inner loops for the walk simulator and path enumeration:
// complex matrix-vector products, fused norms, and small matrix products on
// row-major interleaved storage. A scalar reference implementation always
// exists; AVX2 (x86) and NEON (aarch64) variants are selected at runtime and
// equivalence-tested against the reference. Set QMEAS_SIMD=scalar|avx2|neon
// to force a variant.

namespace qmeas::kernels {

using cd = std::complex<double>;

enum class Isa { scalar, avx2, neon };

/// The instruction set the dispatcher settled on.
Isa active();
std::string isa_name(Isa);

/// Force a variant (throws InputError if unsupported on this machine). Used by
/// the equivalence tests.
void force(Isa);

/// y = A x, A row-major n x n.
void matvec(const cd* a, const cd* x, cd* y, int n);

/// y = A x and returns |y|^2.
double matvec_norm2(const cd* a, const cd* x, cd* y, int n);

/// C = A B, all row-major n x n. C must not alias A or B.
void matmul(const cd* a, const cd* b, cd* c, int n);

/// |x|^2
double norm2(const cd* x, int n);

/// conj(x) . y
cd dot(const cd* x, const cd* y, int n);

namespace ref {
// Scalar reference kernels (always available; the oracle for equivalence tests).
void matvec(const cd* a, const cd* x, cd* y, int n);
double matvec_norm2(const cd* a, const cd* x, cd* y, int n);
void matmul(const cd* a, const cd* b, cd* c, int n);
double norm2(const cd* x, int n);
cd dot(const cd* x, const cd* y, int n);
}  // namespace ref

}  // namespace qmeas::kernels
