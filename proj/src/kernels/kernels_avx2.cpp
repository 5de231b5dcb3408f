#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <complex>
#include <cstddef>

// AVX2+FMA variants of the complex kernels. Layout is interleaved
// [re, im] pairs, two complex doubles per 256-bit register. This TU is the
// only one compiled with -mavx2 -mfma; it must not be entered unless the
// dispatcher verified CPU support.

namespace qmeas::kernels::avx2 {

using cd = std::complex<double>;

namespace {

inline const double* dp(const cd* p) { return reinterpret_cast<const double*>(p); }
inline double* dp(cd* p) { return reinterpret_cast<double*>(p); }

// Sum the two complex lanes of acc into one complex number.
inline cd reduce_complex(__m256d acc) {
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d s = _mm_add_pd(lo, hi);
  alignas(16) double out[2];
  _mm_store_pd(out, s);
  return cd(out[0], out[1]);
}

inline double reduce_scalar(__m256d acc) {
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void matvec(const cd* a, const cd* x, cd* y, int n) {
  const int pairs = n / 2;
  for (int i = 0; i < n; ++i) {
    const double* row = dp(a + static_cast<std::size_t>(i) * n);
    __m256d acc = _mm256_setzero_pd();
    int k = 0;
    for (; k < 2 * pairs; k += 2) {
      __m256d va = _mm256_loadu_pd(row + 2 * k);
      __m256d vx = _mm256_loadu_pd(dp(x) + 2 * k);
      __m256d x_re = _mm256_movedup_pd(vx);
      __m256d x_im = _mm256_permute_pd(vx, 0xF);
      __m256d a_sw = _mm256_permute_pd(va, 0x5);
      acc = _mm256_add_pd(acc, _mm256_fmaddsub_pd(va, x_re, _mm256_mul_pd(a_sw, x_im)));
    }
    cd sum = reduce_complex(acc);
    for (; k < n; ++k) {
      const double ar = row[2 * k], ai = row[2 * k + 1];
      const double xr = x[k].real(), xi = x[k].imag();
      sum += cd(ar * xr - ai * xi, ar * xi + ai * xr);
    }
    y[i] = sum;
  }
}

double norm2(const cd* x, int n) {
  const double* p = dp(x);
  __m256d acc = _mm256_setzero_pd();
  int d = 0;
  const int lim = 2 * n - (2 * n) % 4;
  for (; d < lim; d += 4) {
    __m256d v = _mm256_loadu_pd(p + d);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double s = reduce_scalar(acc);
  for (; d < 2 * n; ++d) s += p[d] * p[d];
  return s;
}

double matvec_norm2(const cd* a, const cd* x, cd* y, int n) {
  matvec(a, x, y, n);
  return norm2(y, n);
}

void matmul(const cd* a, const cd* b, cd* c, int n) {
  const int pairs = n / 2;
  for (int i = 0; i < n; ++i) {
    double* crow = dp(c + static_cast<std::size_t>(i) * n);
    for (int d = 0; d < 2 * n; ++d) crow[d] = 0.0;
    const cd* arow = a + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < n; ++k) {
      const __m256d ar = _mm256_set1_pd(arow[k].real());
      const __m256d ai = _mm256_set1_pd(arow[k].imag());
      const double* brow = dp(b + static_cast<std::size_t>(k) * n);
      int j = 0;
      for (; j < 2 * pairs; j += 2) {
        __m256d vb = _mm256_loadu_pd(brow + 2 * j);
        __m256d vc = _mm256_loadu_pd(crow + 2 * j);
        __m256d b_sw = _mm256_permute_pd(vb, 0x5);
        vc = _mm256_add_pd(vc, _mm256_fmaddsub_pd(ar, vb, _mm256_mul_pd(ai, b_sw)));
        _mm256_storeu_pd(crow + 2 * j, vc);
      }
      for (; j < n; ++j) {
        const double br = brow[2 * j], bi = brow[2 * j + 1];
        const double war = arow[k].real(), wai = arow[k].imag();
        crow[2 * j] += war * br - wai * bi;
        crow[2 * j + 1] += war * bi + wai * br;
      }
    }
  }
}

cd dot(const cd* x, const cd* y, int n) {
  const int pairs = n / 2;
  __m256d acc = _mm256_setzero_pd();
  int k = 0;
  for (; k < 2 * pairs; k += 2) {
    __m256d vx = _mm256_loadu_pd(dp(x) + 2 * k);
    __m256d vy = _mm256_loadu_pd(dp(y) + 2 * k);
    __m256d x_re = _mm256_movedup_pd(vx);
    __m256d x_im = _mm256_permute_pd(vx, 0xF);
    __m256d y_sw = _mm256_permute_pd(vy, 0x5);
    acc = _mm256_add_pd(acc, _mm256_fmsubadd_pd(x_re, vy, _mm256_mul_pd(x_im, y_sw)));
  }
  cd sum = reduce_complex(acc);
  for (; k < n; ++k) {
    const double xr = x[k].real(), xi = x[k].imag();
    const double yr = y[k].real(), yi = y[k].imag();
    sum += cd(xr * yr + xi * yi, xr * yi - xi * yr);
  }
  return sum;
}

}  // namespace qmeas::kernels::avx2

#endif  // x86_64
