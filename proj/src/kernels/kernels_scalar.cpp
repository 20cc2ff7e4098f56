#include "lict/kernels/kernels.hpp"

#include <cstring>

namespace lict::kernels {
namespace {

void gemm_scalar(const double* A, const double* B, double* C, long M, long N, long K, bool acc) {
  if (!acc) std::memset(C, 0, sizeof(double) * (size_t)(M * N));
#pragma omp parallel for schedule(static)
  for (long i = 0; i < M; ++i) {
    double* c = C + i * N;
    const double* a = A + i * K;
    for (long k = 0; k < K; ++k) {
      const double aik = a[k];
      const double* b = B + k * N;
      for (long j = 0; j < N; ++j) c[j] += aik * b[j];
    }
  }
}

void gemm_nt_scalar(const double* A, const double* B, double* C, long M, long N, long K, bool acc) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < M; ++i) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (long j = 0; j < N; ++j) {
      const double* b = B + j * K;
      double s = 0.0;
      for (long k = 0; k < K; ++k) s += a[k] * b[k];
      c[j] = acc ? c[j] + s : s;
    }
  }
}

void gemm_tn_scalar(const double* A, const double* B, double* C, long M, long N, long K, bool acc) {
  if (!acc) std::memset(C, 0, sizeof(double) * (size_t)(M * N));
#pragma omp parallel for schedule(static)
  for (long i = 0; i < M; ++i) {
    double* c = C + i * N;
    for (long k = 0; k < K; ++k) {
      const double aki = A[k * M + i];
      const double* b = B + k * N;
      for (long j = 0; j < N; ++j) c[j] += aki * b[j];
    }
  }
}

void vadd_scalar(const double* a, const double* b, double* c, long n) {
  for (long i = 0; i < n; ++i) c[i] = a[i] + b[i];
}
void vsub_scalar(const double* a, const double* b, double* c, long n) {
  for (long i = 0; i < n; ++i) c[i] = a[i] - b[i];
}
void vmul_scalar(const double* a, const double* b, double* c, long n) {
  for (long i = 0; i < n; ++i) c[i] = a[i] * b[i];
}
void vscale_scalar(const double* a, double s, double* c, long n) {
  for (long i = 0; i < n; ++i) c[i] = a[i] * s;
}
void axpy_scalar(double a, const double* x, double* y, long n) {
  for (long i = 0; i < n; ++i) y[i] += a * x[i];
}
double dot_scalar(const double* a, const double* b, long n) {
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}
double vsum_scalar(const double* a, long n) {
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += a[i];
  return s;
}
void leaky_fwd_scalar(const double* x, double slope, double* y, long n) {
  for (long i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}
void leaky_bwd_scalar(const double* x, const double* up, double slope, double* dx, long n) {
  for (long i = 0; i < n; ++i) dx[i] += up[i] * (x[i] > 0.0 ? 1.0 : slope);
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table = {
      gemm_scalar,  gemm_nt_scalar, gemm_tn_scalar, vadd_scalar,      vsub_scalar,
      vmul_scalar,  vscale_scalar,  axpy_scalar,    dot_scalar,       vsum_scalar,
      leaky_fwd_scalar, leaky_bwd_scalar, "scalar",
  };
  return table;
}

}  // namespace lict::kernels
