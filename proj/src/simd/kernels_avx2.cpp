// AVX2+FMA variants of the primitive table. This translation unit is the only
// one compiled with -mavx2 -mfma; everything else stays at the base ISA so the
// dispatcher can fall back to the scalar table on older machines.

#include <cstddef>

#include "pulselab/simd.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

#include "kernel_math.hpp"

namespace pulselab::simd {
namespace {

// exp for 4 doubles. Range reduction against log(2) followed by a rational
// approximation of expm1 on the reduced argument (Cephes coefficients),
// rescaled by 2^n in two steps so the denormal range survives.
// Inputs below -708 flush to +0, matching std::exp to within denormal dust.
inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d nf = _mm256_round_pd(
      _mm256_mul_pd(xc, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(nf, c1, xc);
  r = _mm256_fnmadd_pd(nf, c2, r);
  const __m256d rr = _mm256_mul_pd(r, r);

  __m256d px = _mm256_fmadd_pd(p0, rr, p1);
  px = _mm256_fmadd_pd(px, rr, p2);
  px = _mm256_mul_pd(px, r);
  __m256d qx = _mm256_fmadd_pd(q0, rr, q1);
  qx = _mm256_fmadd_pd(qx, rr, q2);
  qx = _mm256_fmadd_pd(qx, rr, q3);

  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  // e *= 2^n, split as 2^(n/2) * 2^(n - n/2)
  const __m128i n32 = _mm256_cvtpd_epi32(nf);
  const __m128i nh = _mm_srai_epi32(n32, 1);
  const __m128i nr = _mm_sub_epi32(n32, nh);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256d s1 = _mm256_castsi256_pd(_mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(nh), bias), 52));
  const __m256d s2 = _mm256_castsi256_pd(_mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(nr), bias), 52));
  e = _mm256_mul_pd(_mm256_mul_pd(e, s1), s2);

  // flush the far-underflow region to zero
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  return _mm256_andnot_pd(under, e);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

const __m256d kSignMask = _mm256_set1_pd(-0.0);

double l1_norm_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0,
                         _mm256_andnot_pd(kSignMask, _mm256_loadu_pd(x + i)));
    acc1 = _mm256_add_pd(
        acc1, _mm256_andnot_pd(kSignMask, _mm256_loadu_pd(x + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0,
                         _mm256_andnot_pd(kSignMask, _mm256_loadu_pd(x + i)));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r =
        _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, r);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double max_abs_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_max_pd(acc,
                        _mm256_andnot_pd(kSignMask, _mm256_loadu_pd(x + i)));
  }
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d m2 = _mm_max_pd(lo, hi);
  double m = _mm_cvtsd_f64(_mm_max_sd(m2, _mm_unpackhi_pd(m2, m2)));
  for (; i < n; ++i) {
    const double v = std::fabs(x[i]);
    if (v > m) m = v;
  }
  return m;
}

void matvec_avx2(const double* A, std::size_t m, std::size_t n,
                 const double* x, double* y) {
  for (std::size_t i = 0; i < m; ++i) y[i] = dot_avx2(A + i * n, x, n);
}

void matvec_t_avx2(const double* A, std::size_t m, std::size_t n,
                   const double* x, double* y) {
  for (std::size_t j = 0; j < n; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) axpy_avx2(x[i], A + i * n, y, n);
}

void gram_avx2(const double* B, std::size_t m, std::size_t k, double* out) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double v = dot_avx2(B + i * k, B + j * k, k);
      out[i * m + j] = v;
      out[j * m + i] = v;
    }
  }
}

template <int ORDER>
void gaussian_accum_impl(const double* t, std::size_t n, double shift,
                         double inv_scale, double coeff, double* out) {
  const __m256d vshift = _mm256_set1_pd(shift);
  const __m256d vinv = _mm256_set1_pd(inv_scale);
  const __m256d vcoef = _mm256_set1_pd(coeff);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d three = _mm256_set1_pd(3.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x =
        _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(t + i), vshift), vinv);
    const __m256d x2 = _mm256_mul_pd(x, x);
    const __m256d e = exp_pd(_mm256_mul_pd(x2, mhalf));
    __m256d v;
    if constexpr (ORDER == 0) {
      v = e;
    } else if constexpr (ORDER == 1) {
      v = _mm256_mul_pd(_mm256_sub_pd(_mm256_setzero_pd(), x), e);
    } else if constexpr (ORDER == 2) {
      v = _mm256_mul_pd(_mm256_sub_pd(x2, one), e);
    } else {
      v = _mm256_mul_pd(_mm256_mul_pd(x, _mm256_sub_pd(three, x2)), e);
    }
    _mm256_storeu_pd(out + i,
                     _mm256_fmadd_pd(vcoef, v, _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) {
    const double x = (t[i] - shift) * inv_scale;
    out[i] += coeff * detail::gaussian_deriv(x, ORDER);
  }
}

void gaussian_accum_avx2(int order, const double* t, std::size_t n,
                         double shift, double inv_scale, double coeff,
                         double* out) {
  switch (order) {
    case 0: gaussian_accum_impl<0>(t, n, shift, inv_scale, coeff, out); break;
    case 1: gaussian_accum_impl<1>(t, n, shift, inv_scale, coeff, out); break;
    case 2: gaussian_accum_impl<2>(t, n, shift, inv_scale, coeff, out); break;
    default: gaussian_accum_impl<3>(t, n, shift, inv_scale, coeff, out); break;
  }
}

template <int ORDER>
void cauchy_accum_impl(const double* t, std::size_t n, double shift,
                       double inv_scale, double coeff, double* out) {
  const __m256d vshift = _mm256_set1_pd(shift);
  const __m256d vinv = _mm256_set1_pd(inv_scale);
  const __m256d vcoef = _mm256_set1_pd(coeff);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x =
        _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(t + i), vshift), vinv);
    const __m256d x2 = _mm256_mul_pd(x, x);
    const __m256d u = _mm256_div_pd(one, _mm256_add_pd(one, x2));
    __m256d v;
    if constexpr (ORDER == 0) {
      v = u;
    } else if constexpr (ORDER == 1) {
      const __m256d u2 = _mm256_mul_pd(u, u);
      v = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(-2.0), x), u2);
    } else if constexpr (ORDER == 2) {
      const __m256d u3 = _mm256_mul_pd(_mm256_mul_pd(u, u), u);
      const __m256d poly =
          _mm256_fmadd_pd(_mm256_set1_pd(6.0), x2, _mm256_set1_pd(-2.0));
      v = _mm256_mul_pd(poly, u3);
    } else {
      const __m256d u2 = _mm256_mul_pd(u, u);
      const __m256d u4 = _mm256_mul_pd(u2, u2);
      const __m256d poly = _mm256_mul_pd(
          _mm256_mul_pd(_mm256_set1_pd(24.0), x), _mm256_sub_pd(one, x2));
      v = _mm256_mul_pd(poly, u4);
    }
    _mm256_storeu_pd(out + i,
                     _mm256_fmadd_pd(vcoef, v, _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) {
    const double x = (t[i] - shift) * inv_scale;
    out[i] += coeff * detail::cauchy_deriv(x, ORDER);
  }
}

void cauchy_accum_avx2(int order, const double* t, std::size_t n, double shift,
                       double inv_scale, double coeff, double* out) {
  switch (order) {
    case 0: cauchy_accum_impl<0>(t, n, shift, inv_scale, coeff, out); break;
    case 1: cauchy_accum_impl<1>(t, n, shift, inv_scale, coeff, out); break;
    case 2: cauchy_accum_impl<2>(t, n, shift, inv_scale, coeff, out); break;
    default: cauchy_accum_impl<3>(t, n, shift, inv_scale, coeff, out); break;
  }
}

}  // namespace

const Ops* avx2_ops_or_null() {
  static const Ops table = {
      l1_norm_avx2, dot_avx2,    axpy_avx2,
      max_abs_avx2, matvec_avx2, matvec_t_avx2,
      gram_avx2,    gaussian_accum_avx2, cauchy_accum_avx2,
  };
  return &table;
}

}  // namespace pulselab::simd

#else  // no AVX2 at compile time

namespace pulselab::simd {
const Ops* avx2_ops_or_null() { return nullptr; }
}  // namespace pulselab::simd

#endif
