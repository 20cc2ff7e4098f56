#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstring>

#include "lict/kernels/kernels.hpp"

namespace lict::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void gemm_avx2(const double* A, const double* B, double* C, long M, long N, long K, bool acc) {
  if (!acc) std::memset(C, 0, sizeof(double) * (size_t)(M * N));
#pragma omp parallel for schedule(static)
  for (long i = 0; i < M; ++i) {
    double* c = C + i * N;
    const double* a = A + i * K;
    long k = 0;
    // Two k-steps at a time keeps both broadcasts live across the j sweep.
    for (; k + 2 <= K; k += 2) {
      const __m256d a0 = _mm256_set1_pd(a[k]);
      const __m256d a1 = _mm256_set1_pd(a[k + 1]);
      const double* b0 = B + k * N;
      const double* b1 = b0 + N;
      long j = 0;
      for (; j + 8 <= N; j += 8) {
        __m256d c0 = _mm256_loadu_pd(c + j);
        __m256d c1 = _mm256_loadu_pd(c + j + 4);
        c0 = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), c0);
        c1 = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j + 4), c1);
        c0 = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), c0);
        c1 = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j + 4), c1);
        _mm256_storeu_pd(c + j, c0);
        _mm256_storeu_pd(c + j + 4, c1);
      }
      for (; j < N; ++j) c[j] += a[k] * b0[j] + a[k + 1] * b1[j];
    }
    for (; k < K; ++k) {
      const __m256d a0 = _mm256_set1_pd(a[k]);
      const double* b0 = B + k * N;
      long j = 0;
      for (; j + 4 <= N; j += 4) {
        __m256d c0 = _mm256_loadu_pd(c + j);
        c0 = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), c0);
        _mm256_storeu_pd(c + j, c0);
      }
      for (; j < N; ++j) c[j] += a[k] * b0[j];
    }
  }
}

void gemm_nt_avx2(const double* A, const double* B, double* C, long M, long N, long K, bool acc) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < M; ++i) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (long j = 0; j < N; ++j) {
      const double* b = B + j * K;
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      long k = 0;
      for (; k + 8 <= K; k += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), s1);
      }
      double s = hsum(_mm256_add_pd(s0, s1));
      for (; k < K; ++k) s += a[k] * b[k];
      c[j] = acc ? c[j] + s : s;
    }
  }
}

void gemm_tn_avx2(const double* A, const double* B, double* C, long M, long N, long K, bool acc) {
  if (!acc) std::memset(C, 0, sizeof(double) * (size_t)(M * N));
#pragma omp parallel for schedule(static)
  for (long i = 0; i < M; ++i) {
    double* c = C + i * N;
    for (long k = 0; k < K; ++k) {
      const __m256d av = _mm256_set1_pd(A[k * M + i]);
      const double* b = B + k * N;
      long j = 0;
      for (; j + 4 <= N; j += 4) {
        __m256d c0 = _mm256_loadu_pd(c + j);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + j), c0);
        _mm256_storeu_pd(c + j, c0);
      }
      for (; j < N; ++j) c[j] += A[k * M + i] * b[j];
    }
  }
}

void vadd_avx2(const double* a, const double* b, double* c, long n) {
  long i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}
void vsub_avx2(const double* a, const double* b, double* c, long n) {
  long i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}
void vmul_avx2(const double* a, const double* b, double* c, long n) {
  long i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}
void vscale_avx2(const double* a, double s, double* c, long n) {
  const __m256d sv = _mm256_set1_pd(s);
  long i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) c[i] = a[i] * s;
}
void axpy_avx2(double a, const double* x, double* y, long n) {
  const __m256d av = _mm256_set1_pd(a);
  long i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}
double dot_avx2(const double* a, const double* b, long n) {
  __m256d s = _mm256_setzero_pd();
  long i = 0;
  for (; i + 4 <= n; i += 4)
    s = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s);
  double r = hsum(s);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}
double vsum_avx2(const double* a, long n) {
  __m256d s = _mm256_setzero_pd();
  long i = 0;
  for (; i + 4 <= n; i += 4) s = _mm256_add_pd(s, _mm256_loadu_pd(a + i));
  double r = hsum(s);
  for (; i < n; ++i) r += a[i];
  return r;
}
void leaky_fwd_avx2(const double* x, double slope, double* y, long n) {
  const __m256d sv = _mm256_set1_pd(slope);
  const __m256d zero = _mm256_setzero_pd();
  long i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    __m256d scaled = _mm256_mul_pd(v, sv);
    _mm256_storeu_pd(y + i, _mm256_blendv_pd(scaled, v, mask));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}
void leaky_bwd_avx2(const double* x, const double* up, double slope, double* dx, long n) {
  const __m256d sv = _mm256_set1_pd(slope);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  long i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    __m256d g = _mm256_blendv_pd(sv, one, mask);
    __m256d d = _mm256_loadu_pd(dx + i);
    d = _mm256_fmadd_pd(_mm256_loadu_pd(up + i), g, d);
    _mm256_storeu_pd(dx + i, d);
  }
  for (; i < n; ++i) dx[i] += up[i] * (x[i] > 0.0 ? 1.0 : slope);
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops table = {
      gemm_avx2,  gemm_nt_avx2, gemm_tn_avx2, vadd_avx2,      vsub_avx2,
      vmul_avx2,  vscale_avx2,  axpy_avx2,    dot_avx2,       vsum_avx2,
      leaky_fwd_avx2, leaky_bwd_avx2, "avx2",
  };
  return table;
}

bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace lict::kernels

#endif  // x86_64
