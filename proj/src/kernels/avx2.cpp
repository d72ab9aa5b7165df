// Compiled with -mavx2 -mfma when the toolchain targets x86-64; only reached
// through the dispatch table after a runtime CPU check.

#include "bhc/kernels.hpp"

#if defined(BHC_HAVE_AVX2)

#include <immintrin.h>

#include <cassert>

namespace bhc::kernels {
namespace {

inline const double* raw(std::span<const cplx> v) { return reinterpret_cast<const double*>(v.data()); }
inline double* raw(std::span<cplx> v) { return reinterpret_cast<double*>(v.data()); }

// [xr*wr - xi*wi, xi*wr + xr*wi] for two packed complex numbers.
inline __m256d cmul(__m256d x, __m256d w) {
  const __m256d wr = _mm256_movedup_pd(w);
  const __m256d wi = _mm256_permute_pd(w, 0xF);
  const __m256d xs = _mm256_permute_pd(x, 0x5);
  return _mm256_fmaddsub_pd(x, wr, _mm256_mul_pd(xs, wi));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// acc_same holds [ar*br, ai*bi], acc_swap holds [ar*bi, ai*br].
inline cplx finish_dot(__m256d acc_same, __m256d acc_swap) {
  alignas(32) double sw[4];
  _mm256_store_pd(sw, acc_swap);
  return {hsum(acc_same), (sw[0] - sw[1]) + (sw[2] - sw[3])};
}

cplx dot_avx2(std::span<const cplx> a, std::span<const cplx> b) {
  assert(a.size() == b.size());
  const std::size_t n = a.size();
  const double* pa = raw(a);
  const double* pb = raw(b);
  __m256d same = _mm256_setzero_pd();
  __m256d swap = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * k);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * k);
    same = _mm256_fmadd_pd(va, vb, same);
    swap = _mm256_fmadd_pd(va, _mm256_permute_pd(vb, 0x5), swap);
  }
  cplx r = finish_dot(same, swap);
  for (; k < n; ++k) r += std::conj(a[k]) * b[k];
  return r;
}

void mul_avx2(std::span<cplx> x, std::span<const cplx> w) {
  assert(x.size() == w.size());
  const std::size_t n = x.size();
  double* px = raw(x);
  const double* pw = raw(w);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d vx = _mm256_loadu_pd(px + 2 * k);
    const __m256d vw = _mm256_loadu_pd(pw + 2 * k);
    _mm256_storeu_pd(px + 2 * k, cmul(vx, vw));
  }
  for (; k < n; ++k) x[k] *= w[k];
}

void scale_avx2(std::span<cplx> x, cplx s) {
  const std::size_t n = x.size();
  double* px = raw(x);
  const __m256d vs = _mm256_setr_pd(s.real(), s.imag(), s.real(), s.imag());
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d vx = _mm256_loadu_pd(px + 2 * k);
    _mm256_storeu_pd(px + 2 * k, cmul(vx, vs));
  }
  for (; k < n; ++k) x[k] *= s;
}

void axpy_avx2(std::span<cplx> y, cplx s, std::span<const cplx> x) {
  assert(x.size() == y.size());
  const std::size_t n = y.size();
  double* py = raw(y);
  const double* px = raw(x);
  const __m256d vs = _mm256_setr_pd(s.real(), s.imag(), s.real(), s.imag());
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d vx = _mm256_loadu_pd(px + 2 * k);
    const __m256d vy = _mm256_loadu_pd(py + 2 * k);
    _mm256_storeu_pd(py + 2 * k, _mm256_add_pd(vy, cmul(vx, vs)));
  }
  for (; k < n; ++k) y[k] += s * x[k];
}

double norm2_avx2(std::span<const cplx> x) {
  const std::size_t n = x.size();
  const double* px = raw(x);
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d v = _mm256_loadu_pd(px + 2 * k);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double r = hsum(acc);
  for (; k < n; ++k) r += std::norm(x[k]);
  return r;
}

cplx weighted_dot_avx2(std::span<const cplx> a, std::span<const double> w,
                       std::span<const cplx> b) {
  assert(a.size() == b.size() && a.size() == w.size());
  const std::size_t n = a.size();
  const double* pa = raw(a);
  const double* pb = raw(b);
  __m256d same = _mm256_setzero_pd();
  __m256d swap = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m128d w2 = _mm_loadu_pd(w.data() + k);
    const __m256d ww = _mm256_permute4x64_pd(_mm256_castpd128_pd256(w2), 0x50);
    const __m256d va = _mm256_mul_pd(_mm256_loadu_pd(pa + 2 * k), ww);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * k);
    same = _mm256_fmadd_pd(va, vb, same);
    swap = _mm256_fmadd_pd(va, _mm256_permute_pd(vb, 0x5), swap);
  }
  cplx r = finish_dot(same, swap);
  for (; k < n; ++k) r += w[k] * std::conj(a[k]) * b[k];
  return r;
}

}  // namespace

const Table* avx2_table() {
  static const Table t{dot_avx2, mul_avx2, scale_avx2, axpy_avx2, norm2_avx2, weighted_dot_avx2};
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &t : nullptr;
}

}  // namespace bhc::kernels

#else

namespace bhc::kernels {
const Table* avx2_table() { return nullptr; }
}  // namespace bhc::kernels

#endif
