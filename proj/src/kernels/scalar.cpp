#include "bhc/kernels.hpp"

#include <cassert>

namespace bhc::kernels {
namespace {

cplx dot_scalar(std::span<const cplx> a, std::span<const cplx> b) {
  assert(a.size() == b.size());
  double re = 0.0, im = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double ar = a[k].real(), ai = a[k].imag();
    const double br = b[k].real(), bi = b[k].imag();
    re += ar * br + ai * bi;
    im += ar * bi - ai * br;
  }
  return {re, im};
}

void mul_scalar(std::span<cplx> x, std::span<const cplx> w) {
  assert(x.size() == w.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xr = x[k].real(), xi = x[k].imag();
    const double wr = w[k].real(), wi = w[k].imag();
    x[k] = cplx(xr * wr - xi * wi, xr * wi + xi * wr);
  }
}

void scale_scalar(std::span<cplx> x, cplx s) {
  const double sr = s.real(), si = s.imag();
  for (auto& v : x) {
    const double xr = v.real(), xi = v.imag();
    v = cplx(xr * sr - xi * si, xr * si + xi * sr);
  }
}

void axpy_scalar(std::span<cplx> y, cplx s, std::span<const cplx> x) {
  assert(x.size() == y.size());
  const double sr = s.real(), si = s.imag();
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double xr = x[k].real(), xi = x[k].imag();
    y[k] += cplx(xr * sr - xi * si, xr * si + xi * sr);
  }
}

double norm2_scalar(std::span<const cplx> x) {
  double acc = 0.0;
  for (const auto& v : x) acc += v.real() * v.real() + v.imag() * v.imag();
  return acc;
}

cplx weighted_dot_scalar(std::span<const cplx> a, std::span<const double> w,
                         std::span<const cplx> b) {
  assert(a.size() == b.size() && a.size() == w.size());
  double re = 0.0, im = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double ar = a[k].real(), ai = a[k].imag();
    const double br = b[k].real(), bi = b[k].imag();
    re += w[k] * (ar * br + ai * bi);
    im += w[k] * (ar * bi - ai * br);
  }
  return {re, im};
}

}  // namespace

const Table& scalar_table() {
  static const Table t{dot_scalar, mul_scalar, scale_scalar, axpy_scalar, norm2_scalar,
                       weighted_dot_scalar};
  return t;
}

}  // namespace bhc::kernels
