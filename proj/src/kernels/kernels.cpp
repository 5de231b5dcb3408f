#include "qmeas/kernels.hpp"

#include <cstdlib>
#include <mutex>

#include "qmeas/errors.hpp"

namespace qmeas::kernels {

namespace ref {

void matvec(const cd* a, const cd* x, cd* y, int n) {
  for (int i = 0; i < n; ++i) {
    double sr = 0.0, si = 0.0;
    const cd* row = a + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < n; ++k) {
      const double ar = row[k].real(), ai = row[k].imag();
      const double xr = x[k].real(), xi = x[k].imag();
      sr += ar * xr - ai * xi;
      si += ar * xi + ai * xr;
    }
    y[i] = cd(sr, si);
  }
}

double matvec_norm2(const cd* a, const cd* x, cd* y, int n) {
  matvec(a, x, y, n);
  return norm2(y, n);
}

void matmul(const cd* a, const cd* b, cd* c, int n) {
  for (int i = 0; i < n; ++i) {
    cd* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = cd(0.0, 0.0);
    const cd* arow = a + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < n; ++k) {
      const double ar = arow[k].real(), ai = arow[k].imag();
      const cd* brow = b + static_cast<std::size_t>(k) * n;
      for (int j = 0; j < n; ++j) {
        const double br = brow[j].real(), bi = brow[j].imag();
        crow[j] += cd(ar * br - ai * bi, ar * bi + ai * br);
      }
    }
  }
}

double norm2(const cd* x, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return s;
}

cd dot(const cd* x, const cd* y, int n) {
  double sr = 0.0, si = 0.0;
  for (int i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    sr += xr * yr + xi * yi;
    si += xr * yi - xi * yr;
  }
  return cd(sr, si);
}

}  // namespace ref

#if defined(__x86_64__) || defined(_M_X64)
#define QMEAS_HAVE_AVX2_TU 1
namespace avx2 {
void matvec(const cd* a, const cd* x, cd* y, int n);
double matvec_norm2(const cd* a, const cd* x, cd* y, int n);
void matmul(const cd* a, const cd* b, cd* c, int n);
double norm2(const cd* x, int n);
cd dot(const cd* x, const cd* y, int n);
}  // namespace avx2
#endif

#if defined(__aarch64__)
#define QMEAS_HAVE_NEON_TU 1
namespace neon {
void matvec(const cd* a, const cd* x, cd* y, int n);
double matvec_norm2(const cd* a, const cd* x, cd* y, int n);
void matmul(const cd* a, const cd* b, cd* c, int n);
double norm2(const cd* x, int n);
cd dot(const cd* x, const cd* y, int n);
}  // namespace neon
#endif

namespace {

struct Vtable {
  void (*matvec)(const cd*, const cd*, cd*, int);
  double (*matvec_norm2)(const cd*, const cd*, cd*, int);
  void (*matmul)(const cd*, const cd*, cd*, int);
  double (*norm2)(const cd*, int);
  cd (*dot)(const cd*, const cd*, int);
};

constexpr Vtable kScalar{ref::matvec, ref::matvec_norm2, ref::matmul, ref::norm2, ref::dot};

#ifdef QMEAS_HAVE_AVX2_TU
constexpr Vtable kAvx2{avx2::matvec, avx2::matvec_norm2, avx2::matmul, avx2::norm2, avx2::dot};
#endif
#ifdef QMEAS_HAVE_NEON_TU
constexpr Vtable kNeon{neon::matvec, neon::matvec_norm2, neon::matmul, neon::norm2, neon::dot};
#endif

bool avx2_supported() {
#ifdef QMEAS_HAVE_AVX2_TU
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool neon_supported() {
#ifdef QMEAS_HAVE_NEON_TU
  return true;  // NEON is baseline on aarch64
#else
  return false;
#endif
}

struct Dispatch {
  Vtable table = kScalar;
  Isa isa = Isa::scalar;
};

Dispatch g_dispatch;
std::once_flag g_init;

void select(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      g_dispatch = {kScalar, Isa::scalar};
      return;
    case Isa::avx2:
#ifdef QMEAS_HAVE_AVX2_TU
      if (avx2_supported()) {
        g_dispatch = {kAvx2, Isa::avx2};
        return;
      }
#endif
      throw InputError("kernels: avx2 not supported on this machine");
    case Isa::neon:
#ifdef QMEAS_HAVE_NEON_TU
      if (neon_supported()) {
        g_dispatch = {kNeon, Isa::neon};
        return;
      }
#endif
      throw InputError("kernels: neon not supported on this machine");
  }
  throw InputError("kernels: unknown isa");
}

void init_from_env() {
  const char* env = std::getenv("QMEAS_SIMD");
  std::string want = env ? env : "auto";
  if (want == "scalar") {
    select(Isa::scalar);
  } else if (want == "avx2") {
    select(Isa::avx2);
  } else if (want == "neon") {
    select(Isa::neon);
  } else {
    if (avx2_supported())
      select(Isa::avx2);
    else if (neon_supported())
      select(Isa::neon);
    else
      select(Isa::scalar);
  }
}

const Dispatch& dispatch() {
  std::call_once(g_init, init_from_env);
  return g_dispatch;
}

}  // namespace

Isa active() { return dispatch().isa; }

std::string isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "?";
}

void force(Isa isa) {
  std::call_once(g_init, init_from_env);
  select(isa);
}

void matvec(const cd* a, const cd* x, cd* y, int n) { dispatch().table.matvec(a, x, y, n); }
double matvec_norm2(const cd* a, const cd* x, cd* y, int n) {
  return dispatch().table.matvec_norm2(a, x, y, n);
}
void matmul(const cd* a, const cd* b, cd* c, int n) { dispatch().table.matmul(a, b, c, n); }
double norm2(const cd* x, int n) { return dispatch().table.norm2(x, n); }
cd dot(const cd* x, const cd* y, int n) { return dispatch().table.dot(x, y, n); }

}  // namespace qmeas::kernels
