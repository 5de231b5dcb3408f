#if defined(__aarch64__)

#include <arm_neon.h>

#include <complex>
#include <cstddef>

// NEON variants: one complex double per 128-bit register, [re, im].

namespace qmeas::kernels::neon {

using cd = std::complex<double>;

namespace {
inline const double* dp(const cd* p) { return reinterpret_cast<const double*>(p); }
inline double* dp(cd* p) { return reinterpret_cast<double*>(p); }

// acc += a * b for one complex lane pair.
inline float64x2_t cmla(float64x2_t acc, float64x2_t a, float64x2_t b) {
  // re: ar*br - ai*bi ; im: ar*bi + ai*br
  float64x2_t ar = vdupq_laneq_f64(a, 0);
  float64x2_t ai = vdupq_laneq_f64(a, 1);
  float64x2_t b_sw = vextq_f64(b, b, 1);           // [bi, br]
  float64x2_t t = vmulq_f64(ai, b_sw);             // [ai*bi, ai*br]
  const float64x2_t sign = {-1.0, 1.0};
  acc = vfmaq_f64(acc, ar, b);                     // [+ar*br, +ar*bi]
  acc = vfmaq_f64(acc, t, sign);                   // [-ai*bi, +ai*br]
  return acc;
}
}  // namespace

void matvec(const cd* a, const cd* x, cd* y, int n) {
  for (int i = 0; i < n; ++i) {
    const double* row = dp(a + static_cast<std::size_t>(i) * n);
    float64x2_t acc = vdupq_n_f64(0.0);
    for (int k = 0; k < n; ++k) {
      acc = cmla(acc, vld1q_f64(row + 2 * k), vld1q_f64(dp(x) + 2 * k));
    }
    vst1q_f64(dp(y) + 2 * i, acc);
  }
}

double norm2(const cd* x, int n) {
  const double* p = dp(x);
  float64x2_t acc = vdupq_n_f64(0.0);
  for (int d = 0; d < 2 * n; d += 2) {
    float64x2_t v = vld1q_f64(p + d);
    acc = vfmaq_f64(acc, v, v);
  }
  return vaddvq_f64(acc);
}

double matvec_norm2(const cd* a, const cd* x, cd* y, int n) {
  matvec(a, x, y, n);
  return norm2(y, n);
}

void matmul(const cd* a, const cd* b, cd* c, int n) {
  for (int i = 0; i < n; ++i) {
    double* crow = dp(c + static_cast<std::size_t>(i) * n);
    for (int d = 0; d < 2 * n; ++d) crow[d] = 0.0;
    const cd* arow = a + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < n; ++k) {
      float64x2_t va = vld1q_f64(dp(arow + k));
      const double* brow = dp(b + static_cast<std::size_t>(k) * n);
      for (int j = 0; j < n; ++j) {
        float64x2_t vc = vld1q_f64(crow + 2 * j);
        vc = cmla(vc, va, vld1q_f64(brow + 2 * j));
        vst1q_f64(crow + 2 * j, vc);
      }
    }
  }
}

cd dot(const cd* x, const cd* y, int n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  const float64x2_t sign = {1.0, -1.0};
  for (int k = 0; k < n; ++k) {
    float64x2_t vx = vld1q_f64(dp(x) + 2 * k);
    float64x2_t vy = vld1q_f64(dp(y) + 2 * k);
    // re: xr*yr + xi*yi ; im: xr*yi - xi*yr
    float64x2_t xr = vdupq_laneq_f64(vx, 0);
    float64x2_t xi = vdupq_laneq_f64(vx, 1);
    float64x2_t y_sw = vextq_f64(vy, vy, 1);  // [yi, yr]
    acc = vfmaq_f64(acc, xr, vy);
    acc = vfmaq_f64(acc, vmulq_f64(xi, y_sw), sign);
  }
  alignas(16) double out[2];
  vst1q_f64(out, acc);
  return cd(out[0], out[1]);
}

}  // namespace qmeas::kernels::neon

#endif  // aarch64
