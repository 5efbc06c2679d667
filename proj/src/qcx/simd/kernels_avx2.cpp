#include "qcx/simd/kernels.hpp"

#include <cstring>

#if defined(__x86_64__) || defined(_M_X64)
#define QCX_HAVE_X86 1
#include <immintrin.h>
#else
#define QCX_HAVE_X86 0
#endif

namespace qcx::simd {

#if QCX_HAVE_X86

#define QCX_AVX2 __attribute__((target("avx2,fma")))

namespace {

// Two complex doubles per 256-bit lane group: [re0, im0, re1, im1].

QCX_AVX2 inline __m256d cmul2(__m256d a, __m256d b) {
  __m256d ar = _mm256_movedup_pd(a);          // [ar0, ar0, ar1, ar1]
  __m256d ai = _mm256_permute_pd(a, 0xF);     // [ai0, ai0, ai1, ai1]
  __m256d bsw = _mm256_permute_pd(b, 0x5);    // [bi0, br0, bi1, br1]
  return _mm256_fmaddsub_pd(ar, b, _mm256_mul_pd(ai, bsw));
}

QCX_AVX2 inline __m256d conj_mul2(__m256d a, __m256d b) {
  // conj(a)*b : re = ar*br + ai*bi, im = ar*bi - ai*br
  __m256d ar = _mm256_movedup_pd(a);
  __m256d ai = _mm256_permute_pd(a, 0xF);
  __m256d bsw = _mm256_permute_pd(b, 0x5);
  // fmsubadd: even lanes ar*br - (-ai*bi) pattern needs sign flip on ai first
  const __m256d neg = _mm256_set_pd(-0.0, 0.0, -0.0, 0.0);  // flips lanes 1,3
  __m256d ai_alt = _mm256_xor_pd(ai, neg);    // [ai0, -ai0, ai1, -ai1]
  return _mm256_fmadd_pd(ar, b, _mm256_mul_pd(ai_alt, bsw));
}

QCX_AVX2 void v_abs2(const cplx* z, double* out, std::size_t n) {
  const double* p = reinterpret_cast<const double*>(z);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v0 = _mm256_loadu_pd(p + 2 * i);
    __m256d v1 = _mm256_loadu_pd(p + 2 * i + 4);
    __m256d h = _mm256_hadd_pd(_mm256_mul_pd(v0, v0), _mm256_mul_pd(v1, v1));
    // hadd lane order is [z0, z2, z1, z3]
    _mm256_storeu_pd(out + i, _mm256_permute4x64_pd(h, 0xD8));
  }
  for (; i < n; ++i)
    out[i] = z[i].real() * z[i].real() + z[i].imag() * z[i].imag();
}

QCX_AVX2 void v_cmul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  double* po = reinterpret_cast<double*>(out);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    _mm256_storeu_pd(po + 2 * i, cmul2(_mm256_loadu_pd(pa + 2 * i),
                                       _mm256_loadu_pd(pb + 2 * i)));
  for (; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] = cplx(ar * br - ai * bi, ar * bi + ai * br);
  }
}

QCX_AVX2 void v_conj_mul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  double* po = reinterpret_cast<double*>(out);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    _mm256_storeu_pd(po + 2 * i, conj_mul2(_mm256_loadu_pd(pa + 2 * i),
                                           _mm256_loadu_pd(pb + 2 * i)));
  for (; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    out[i] = cplx(ar * br + ai * bi, ar * bi - ai * br);
  }
}

QCX_AVX2 void v_cmul_inplace(cplx* x, const cplx* w, std::size_t n) {
  v_cmul(x, w, x, n);
}

QCX_AVX2 void v_caxpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
  const double* px = reinterpret_cast<const double*>(x);
  double* py = reinterpret_cast<double*>(y);
  const __m256d al = _mm256_set_pd(alpha.imag(), alpha.real(),
                                   alpha.imag(), alpha.real());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d acc = _mm256_add_pd(_mm256_loadu_pd(py + 2 * i),
                                cmul2(al, _mm256_loadu_pd(px + 2 * i)));
    _mm256_storeu_pd(py + 2 * i, acc);
  }
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += cplx(alpha.real() * xr - alpha.imag() * xi,
                 alpha.real() * xi + alpha.imag() * xr);
  }
}

QCX_AVX2 void v_scale_real(double s, cplx* x, std::size_t n) {
  double* p = reinterpret_cast<double*>(x);
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    _mm256_storeu_pd(p + 2 * i, _mm256_mul_pd(vs, _mm256_loadu_pd(p + 2 * i)));
  for (; i < n; ++i) x[i] *= s;
}

QCX_AVX2 cplx v_cdot(const cplx* a, const cplx* b, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // a * conj(b) == conj( conj(a) * b )
    __m256d m = conj_mul2(_mm256_loadu_pd(pb + 2 * i),
                          _mm256_loadu_pd(pa + 2 * i));
    acc = _mm256_add_pd(acc, m);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double re = lanes[0] + lanes[2];
  double im = lanes[1] + lanes[3];
  for (; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;
    im += ai * br - ar * bi;
  }
  return {re, im};
}

QCX_AVX2 double v_sum_abs2(const cplx* z, std::size_t n) {
  const double* p = reinterpret_cast<const double*>(z);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d v = _mm256_loadu_pd(p + 2 * i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i)
    s += z[i].real() * z[i].real() + z[i].imag() * z[i].imag();
  return s;
}

// Expands 4 mask bytes into a 4-lane "keep" mask (all-ones where byte == 0).
QCX_AVX2 inline __m256d keep_mask4(const std::uint8_t* m) {
  int packed;
  std::memcpy(&packed, m, 4);
  __m128i bytes = _mm_cvtsi32_si128(packed);
  __m256i wide = _mm256_cvtepu8_epi64(bytes);
  __m256i keep = _mm256_cmpeq_epi64(wide, _mm256_setzero_si256());
  return _mm256_castsi256_pd(keep);
}

template <bool Imag>
QCX_AVX2 void v_quotient(const cplx* a, const cplx* b, const std::uint8_t* mask,
                         double* out, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d a0 = _mm256_loadu_pd(pa + 2 * i), a1 = _mm256_loadu_pd(pa + 2 * i + 4);
    __m256d b0 = _mm256_loadu_pd(pb + 2 * i), b1 = _mm256_loadu_pd(pb + 2 * i + 4);
    __m256d m0 = conj_mul2(a0, b0), m1 = conj_mul2(a1, b1);
    // gather the wanted component of each product: lanes [0,2] re, [1,3] im
    __m256d num;
    if constexpr (!Imag) {
      num = _mm256_permute4x64_pd(_mm256_unpacklo_pd(m0, m1), 0xD8);
    } else {
      num = _mm256_permute4x64_pd(_mm256_unpackhi_pd(m0, m1), 0xD8);
    }
    __m256d h = _mm256_hadd_pd(_mm256_mul_pd(a0, a0), _mm256_mul_pd(a1, a1));
    __m256d den = _mm256_permute4x64_pd(h, 0xD8);
    __m256d q = _mm256_div_pd(num, den);
    _mm256_storeu_pd(out + i, _mm256_and_pd(q, keep_mask4(mask + i)));
  }
  for (; i < n; ++i) {
    if (mask[i]) {
      out[i] = 0.0;
      continue;
    }
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    const double den = ar * ar + ai * ai;
    out[i] = (Imag ? (ar * bi - ai * br) : (ar * br + ai * bi)) / den;
  }
}

// unpacklo(m0,m1) = [m0.re0, m1.re0, m0.re1, m1.re1] -> order z0,z2,z1,z3,
// fixed by the same 0xD8 permute used elsewhere.

void v_real_quotient(const cplx* a, const cplx* b, const std::uint8_t* mask,
                     double* out, std::size_t n) {
  v_quotient<false>(a, b, mask, out, n);
}
void v_imag_quotient(const cplx* a, const cplx* b, const std::uint8_t* mask,
                     double* out, std::size_t n) {
  v_quotient<true>(a, b, mask, out, n);
}

const KernelTable avx2 = {
    "avx2",       v_abs2,       v_cmul,     v_conj_mul,
    v_cmul_inplace, v_caxpy,    v_scale_real, v_cdot,
    v_sum_abs2,   v_real_quotient, v_imag_quotient,
};

}  // namespace

bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable* avx2_table() { return avx2_supported() ? &avx2 : nullptr; }

#else  // !QCX_HAVE_X86

bool avx2_supported() { return false; }
const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace qcx::simd
