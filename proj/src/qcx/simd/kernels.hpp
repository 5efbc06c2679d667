#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>

namespace qcx::simd {

using cplx = std::complex<double>;

// Data-parallel inner-loop kernels on contiguous arrays. Complex data is
// interleaved (re, im), i.e. the memory layout of std::complex<double>.
// Every entry has a scalar reference implementation and, on x86-64 with
// AVX2+FMA, a vectorized variant; the active table is chosen once at startup.
struct KernelTable {
  const char* name;

  // out[i] = |z[i]|^2
  void (*abs2)(const cplx* z, double* out, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*cmul)(const cplx* a, const cplx* b, cplx* out, std::size_t n);
  // out[i] = conj(a[i]) * b[i]
  void (*conj_mul)(const cplx* a, const cplx* b, cplx* out, std::size_t n);
  // x[i] *= w[i]
  void (*cmul_inplace)(cplx* x, const cplx* w, std::size_t n);
  // y[i] += alpha * x[i]
  void (*caxpy)(cplx alpha, const cplx* x, cplx* y, std::size_t n);
  // x[i] *= s
  void (*scale_real)(double s, cplx* x, std::size_t n);
  // sum_i a[i] * conj(b[i])
  cplx (*cdot)(const cplx* a, const cplx* b, std::size_t n);
  // sum_i |z[i]|^2
  double (*sum_abs2)(const cplx* z, std::size_t n);
  // out[i] = Re(conj(a[i]) * b[i]) / |a[i]|^2, forced to 0 where mask[i] != 0
  void (*real_quotient)(const cplx* a, const cplx* b, const std::uint8_t* mask,
                        double* out, std::size_t n);
  // out[i] = Im(conj(a[i]) * b[i]) / |a[i]|^2, forced to 0 where mask[i] != 0
  void (*imag_quotient)(const cplx* a, const cplx* b, const std::uint8_t* mask,
                        double* out, std::size_t n);
};

// Active table: AVX2 when the CPU supports it and force_scalar() is off.
const KernelTable& active();
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when unsupported at build/run time

bool avx2_supported();
// Test hook; also honored via environment QCONDEX_NO_SIMD=1.
void force_scalar(bool on);

}  // namespace qcx::simd
