#pragma once

#include <cmath>
#include <cstddef>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define DNETREG_SIMD_AVX2 1
#endif

namespace dnetreg::simd {

// Vectorized exp/log kernels for the likelihood inner loops. Accuracy is
// a few ulp (checked against libm in the unit tests); the scalar libm
// fallback is used when AVX2 is unavailable.

#ifdef DNETREG_SIMD_AVX2

// exp(x), arguments clamped to +-708 (beyond that libm over/underflows too)
inline __m256d exp4(__m256d x) {
  const __m256d ln2_inv = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(0.693145751953125);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  x = _mm256_min_pd(_mm256_set1_pd(708.0),
                    _mm256_max_pd(_mm256_set1_pd(-708.0), x));
  __m256d k = _mm256_round_pd(_mm256_mul_pd(x, ln2_inv),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, ln2_hi, x);
  r = _mm256_fnmadd_pd(k, ln2_lo, r);
  // Taylor series to r^13/13!; |r| <= ln2/2 keeps the tail below 1 ulp
  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  __m128i ki = _mm256_cvtpd_epi32(k);
  __m256i bits = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(ki), _mm256_set1_epi64x(1023)),
      52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

// log(1+e) for e in [0, 1] only (the range produced by exp(-|eta|))
inline __m256d log1p4_unit(__m256d e) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d u = _mm256_add_pd(one, e);
  const __m256d sqrt2 = _mm256_set1_pd(1.41421356237309504880);
  __m256d big = _mm256_cmp_pd(u, sqrt2, _CMP_GT_OQ);
  __m256d uh = _mm256_blendv_pd(u, _mm256_mul_pd(u, _mm256_set1_pd(0.5)), big);
  __m256d z = _mm256_div_pd(_mm256_sub_pd(uh, one), _mm256_add_pd(uh, one));
  __m256d w = _mm256_mul_pd(z, z);
  // 2*atanh(z) series; |z| <= 0.1716 after the sqrt(2) fold
  __m256d p = _mm256_set1_pd(1.0 / 23.0);
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 21.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 19.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 17.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 15.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 13.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 11.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 9.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 7.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, w, _mm256_set1_pd(1.0 / 3.0));
  p = _mm256_fmadd_pd(p, w, one);
  __m256d lg = _mm256_mul_pd(_mm256_add_pd(z, z), p);
  const __m256d ln2 = _mm256_set1_pd(0.69314718055994530942);
  return _mm256_add_pd(lg, _mm256_and_pd(big, ln2));
}

#endif  // DNETREG_SIMD_AVX2

/// out[i] = exp(x[i])
inline void exp_array(const double* x, double* out, size_t n) {
  size_t i = 0;
#ifdef DNETREG_SIMD_AVX2
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
#endif
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

/// out[i] = log(1 + e[i]) with e[i] required to be in [0, 1]
inline void log1p_unit_array(const double* e, double* out, size_t n) {
  size_t i = 0;
#ifdef DNETREG_SIMD_AVX2
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, log1p4_unit(_mm256_loadu_pd(e + i)));
#endif
  for (; i < n; ++i) out[i] = std::log1p(e[i]);
}

}  // namespace dnetreg::simd
