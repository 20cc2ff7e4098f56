#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "lict/kernels/kernels.hpp"
#include "lict/rng.hpp"

using namespace lict;

namespace {

std::vector<double> random_vec(long n, Rng& rng) {
  std::vector<double> v((size_t)n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == doctest::Approx(b[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("dispatched gemm variants match the scalar reference") {
  const auto& ref = kernels::scalar_ops();
  const auto& act = kernels::ops();
  INFO("active isa: " << kernels::active_isa());
  Rng rng(11);
  // deliberately awkward sizes to hit every tail path
  const std::vector<std::array<long, 3>> sizes = {
      {1, 1, 1}, {3, 5, 7}, {16, 16, 16}, {13, 33, 9}, {32, 127, 65}, {7, 8, 256}};
  for (auto [M, N, K] : sizes) {
    auto A = random_vec(M * K, rng);
    auto B = random_vec(K * N, rng);
    auto Bt = random_vec(N * K, rng);
    auto At = random_vec(K * M, rng);
    auto C0 = random_vec(M * N, rng);

    for (bool acc : {false, true}) {
      auto c1 = C0, c2 = C0;
      ref.gemm(A.data(), B.data(), c1.data(), M, N, K, acc);
      act.gemm(A.data(), B.data(), c2.data(), M, N, K, acc);
      check_close(c1, c2, 1e-12);

      c1 = C0, c2 = C0;
      ref.gemm_nt(A.data(), Bt.data(), c1.data(), M, N, K, acc);
      act.gemm_nt(A.data(), Bt.data(), c2.data(), M, N, K, acc);
      check_close(c1, c2, 1e-12);

      c1 = C0, c2 = C0;
      ref.gemm_tn(At.data(), B.data(), c1.data(), M, N, K, acc);
      act.gemm_tn(At.data(), B.data(), c2.data(), M, N, K, acc);
      check_close(c1, c2, 1e-12);
    }
  }
}

TEST_CASE("dispatched elementwise kernels match the scalar reference") {
  const auto& ref = kernels::scalar_ops();
  const auto& act = kernels::ops();
  Rng rng(12);
  for (long n : {1L, 3L, 4L, 17L, 256L, 1001L}) {
    auto a = random_vec(n, rng);
    auto b = random_vec(n, rng);
    std::vector<double> c1((size_t)n), c2((size_t)n);

    ref.vadd(a.data(), b.data(), c1.data(), n);
    act.vadd(a.data(), b.data(), c2.data(), n);
    check_close(c1, c2, 1e-15);

    ref.vsub(a.data(), b.data(), c1.data(), n);
    act.vsub(a.data(), b.data(), c2.data(), n);
    check_close(c1, c2, 1e-15);

    ref.vmul(a.data(), b.data(), c1.data(), n);
    act.vmul(a.data(), b.data(), c2.data(), n);
    check_close(c1, c2, 1e-15);

    ref.vscale(a.data(), 1.7, c1.data(), n);
    act.vscale(a.data(), 1.7, c2.data(), n);
    check_close(c1, c2, 1e-15);

    c1 = b;
    c2 = b;
    ref.axpy(0.3, a.data(), c1.data(), n);
    act.axpy(0.3, a.data(), c2.data(), n);
    check_close(c1, c2, 1e-14);

    REQUIRE(ref.dot(a.data(), b.data(), n) ==
            doctest::Approx(act.dot(a.data(), b.data(), n)).epsilon(1e-12));
    REQUIRE(ref.vsum(a.data(), n) == doctest::Approx(act.vsum(a.data(), n)).epsilon(1e-12));

    ref.leaky_relu_fwd(a.data(), 0.1, c1.data(), n);
    act.leaky_relu_fwd(a.data(), 0.1, c2.data(), n);
    check_close(c1, c2, 1e-15);

    c1.assign((size_t)n, 0.5);
    c2.assign((size_t)n, 0.5);
    ref.leaky_relu_bwd(a.data(), b.data(), 0.1, c1.data(), n);
    act.leaky_relu_bwd(a.data(), b.data(), 0.1, c2.data(), n);
    check_close(c1, c2, 1e-14);
  }
}
