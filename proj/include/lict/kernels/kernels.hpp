#pragma once

#include <cstddef>

// Arithmetic inner loops behind the tensor engine. Every kernel has a scalar
// reference implementation and may have a SIMD variant; the active table is
// chosen once at startup from CPU capabilities. Set LICT_FORCE_SCALAR=1 in
// the environment to pin the reference kernels.
namespace lict::kernels {

struct Ops {
  // C[M,N] = A[M,K] * B[K,N], row-major. acc: accumulate into C.
  void (*gemm)(const double* A, const double* B, double* C, long M, long N, long K, bool acc);
  // C[M,N] = A[M,K] * B[N,K]^T
  void (*gemm_nt)(const double* A, const double* B, double* C, long M, long N, long K, bool acc);
  // C[M,N] = A[K,M]^T * B[K,N]
  void (*gemm_tn)(const double* A, const double* B, double* C, long M, long N, long K, bool acc);

  void (*vadd)(const double* a, const double* b, double* c, long n);
  void (*vsub)(const double* a, const double* b, double* c, long n);
  void (*vmul)(const double* a, const double* b, double* c, long n);
  void (*vscale)(const double* a, double s, double* c, long n);
  void (*axpy)(double a, const double* x, double* y, long n);  // y += a*x
  double (*dot)(const double* a, const double* b, long n);
  double (*vsum)(const double* a, long n);
  void (*leaky_relu_fwd)(const double* x, double slope, double* y, long n);
  // dx += upstream * (x > 0 ? 1 : slope)
  void (*leaky_relu_bwd)(const double* x, const double* up, double slope, double* dx, long n);

  const char* name;
};

const Ops& scalar_ops();

#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
bool avx2_supported();
#endif

// Dispatched table (resolved once, stable for the process lifetime).
const Ops& ops();
const char* active_isa();

}  // namespace lict::kernels
