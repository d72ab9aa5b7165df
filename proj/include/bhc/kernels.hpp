#pragma once

// Complex-valued inner loops shared by the MPS and exact-diagonalization code.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The variant is chosen once at startup from the CPU
// feature flags; setting BHC_KERNELS=scalar in the environment forces the
// reference path. Both paths are equivalence-tested in tests/test_kernels.cpp.

#include <complex>
#include <span>
#include <string_view>

namespace bhc::kernels {

using cplx = std::complex<double>;

enum class Isa { scalar, avx2 };

struct Table {
  /// sum_k conj(a_k) * b_k
  cplx (*dot)(std::span<const cplx> a, std::span<const cplx> b);
  /// x_k *= w_k
  void (*mul)(std::span<cplx> x, std::span<const cplx> w);
  /// x_k *= s
  void (*scale)(std::span<cplx> x, cplx s);
  /// y_k += s * x_k
  void (*axpy)(std::span<cplx> y, cplx s, std::span<const cplx> x);
  /// sum_k |x_k|^2
  double (*norm2)(std::span<const cplx> x);
  /// sum_k w_k * conj(a_k) * b_k with real weights
  cplx (*weighted_dot)(std::span<const cplx> a, std::span<const double> w,
                       std::span<const cplx> b);
};

const Table& scalar_table();
// nullptr when the build or the CPU lacks AVX2.
const Table* avx2_table();

/// The table selected for this process.
const Table& active();
Isa active_isa();
std::string_view isa_name(Isa isa);

inline cplx dot(std::span<const cplx> a, std::span<const cplx> b) { return active().dot(a, b); }
inline void mul(std::span<cplx> x, std::span<const cplx> w) { active().mul(x, w); }
inline void scale(std::span<cplx> x, cplx s) { active().scale(x, s); }
inline void axpy(std::span<cplx> y, cplx s, std::span<const cplx> x) { active().axpy(y, s, x); }
inline double norm2(std::span<const cplx> x) { return active().norm2(x); }
inline cplx weighted_dot(std::span<const cplx> a, std::span<const double> w,
                         std::span<const cplx> b) {
  return active().weighted_dot(a, w, b);
}

}  // namespace bhc::kernels
