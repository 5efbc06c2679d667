#include "qcx/simd/kernels.hpp"

namespace qcx::simd {
namespace {

void s_abs2(const cplx* z, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = z[i].real() * z[i].real() + z[i].imag() * z[i].imag();
}

void s_cmul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] = cplx(ar * br - ai * bi, ar * bi + ai * br);
  }
}

void s_conj_mul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] = cplx(ar * br + ai * bi, ar * bi - ai * br);
  }
}

void s_cmul_inplace(cplx* x, const cplx* w, std::size_t n) {
  s_cmul(x, w, x, n);
}

void s_caxpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
  const double cr = alpha.real(), ci = alpha.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += cplx(cr * xr - ci * xi, cr * xi + ci * xr);
  }
}

void s_scale_real(double s, cplx* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

cplx s_cdot(const cplx* a, const cplx* b, std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;
    im += ai * br - ar * bi;
  }
  return {re, im};
}

double s_sum_abs2(const cplx* z, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += z[i].real() * z[i].real() + z[i].imag() * z[i].imag();
  return acc;
}

void s_real_quotient(const cplx* a, const cplx* b, const std::uint8_t* mask,
                     double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) {
      out[i] = 0.0;
      continue;
    }
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] = (ar * br + ai * bi) / (ar * ar + ai * ai);
  }
}

void s_imag_quotient(const cplx* a, const cplx* b, const std::uint8_t* mask,
                     double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) {
      out[i] = 0.0;
      continue;
    }
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] = (ar * bi - ai * br) / (ar * ar + ai * ai);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      "scalar",     s_abs2,       s_cmul,     s_conj_mul,
      s_cmul_inplace, s_caxpy,    s_scale_real, s_cdot,
      s_sum_abs2,   s_real_quotient, s_imag_quotient,
  };
  return t;
}

}  // namespace qcx::simd
