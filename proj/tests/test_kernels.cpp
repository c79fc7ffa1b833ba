#include <doctest.h>

#include <cstring>
#include <vector>

#include "fms/kernels.hpp"
#include "fms/rng.hpp"
#include "fms/tensor.hpp"

#include "testutil.hpp"

using namespace fms;

namespace {

// Independent oracle with a different loop order and accumulation pattern
// than the production kernels.
template <typename T>
Tensor<T> oracle_matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const int64_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor<T> c({n, m});
  for (int64_t j = 0; j < m; ++j)
    for (int64_t i = 0; i < n; ++i) {
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      c[i * m + j] = acc;
    }
  return c;
}

}  // namespace

TEST_CASE("matmul matches a brute-force triple-loop oracle") {
  rng::SplitMix64 g(11);
  const Tensord a = testutil::random_tensor({2, 3}, g);
  const Tensord b = testutil::random_tensor({3, 2}, g);
  Tensord c({2, 2});
  kernels::matmul(a.data(), b.data(), c.data(), 2, 3, 2);
  const Tensord ref = oracle_matmul(a, b);
  for (int64_t i = 0; i < 4; ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-6));

  for (int trial = 0; trial < 20; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng::bounded(g, 12));
    const int64_t k = 1 + static_cast<int64_t>(rng::bounded(g, 12));
    const int64_t m = 1 + static_cast<int64_t>(rng::bounded(g, 12));
    const Tensord A = testutil::random_tensor({n, k}, g);
    const Tensord B = testutil::random_tensor({k, m}, g);
    Tensord C({n, m});
    kernels::matmul(A.data(), B.data(), C.data(), n, k, m);
    const Tensord R = oracle_matmul(A, B);
    for (int64_t i = 0; i < C.numel(); ++i)
      CHECK(C[i] == doctest::Approx(R[i]).epsilon(1e-9));
  }
}

TEST_CASE("transposed matmul variants agree with explicit transposition") {
  rng::SplitMix64 g(12);
  const Tensord a = testutil::random_tensor({5, 7}, g);
  const Tensord b = testutil::random_tensor({4, 7}, g);  // for a * b^T
  Tensord c({5, 4});
  kernels::matmul_nt(a.data(), b.data(), c.data(), 5, 7, 4);
  Tensord bt({7, 4});
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 7; ++j) bt[j * 4 + i] = b[i * 7 + j];
  const Tensord ref = oracle_matmul(a, bt);
  for (int64_t i = 0; i < c.numel(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  const Tensord x = testutil::random_tensor({6, 3}, g);  // for x^T * y
  const Tensord y = testutil::random_tensor({6, 5}, g);
  Tensord z({3, 5});
  kernels::matmul_tn(x.data(), y.data(), z.data(), 6, 3, 5);
  Tensord xt({3, 6});
  for (int64_t i = 0; i < 6; ++i)
    for (int64_t j = 0; j < 3; ++j) xt[j * 6 + i] = x[i * 3 + j];
  const Tensord ref2 = oracle_matmul(xt, y);
  for (int64_t i = 0; i < z.numel(); ++i) CHECK(z[i] == doctest::Approx(ref2[i]).epsilon(1e-12));
}

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
  rng::SplitMix64 g(13);
  const int64_t n = 257, k = 65, m = 33;
  const Tensorf a = testutil::random_tensor({n, k}, g).cast<float>();
  const Tensorf b = testutil::random_tensor({k, m}, g).cast<float>();

  Tensorf c1({n, m}), c2({n, m});
  kernels::serial::matmul(a.data(), b.data(), c1.data(), n, k, m);
  kernels::par::matmul(a.data(), b.data(), c2.data(), n, k, m);
  CHECK(std::memcmp(c1.data(), c2.data(), sizeof(float) * static_cast<size_t>(n * m)) == 0);

  Tensorf d1({n, k}), d2({n, k});
  kernels::serial::matmul_nt(c1.data(), b.data(), d1.data(), n, m, k);
  kernels::par::matmul_nt(c1.data(), b.data(), d2.data(), n, m, k);
  CHECK(std::memcmp(d1.data(), d2.data(), sizeof(float) * static_cast<size_t>(n * k)) == 0);

  Tensorf e1({k, m}), e2({k, m});
  kernels::serial::matmul_tn(a.data(), c1.data(), e1.data(), n, k, m);
  kernels::par::matmul_tn(a.data(), c1.data(), e2.data(), n, k, m);
  CHECK(std::memcmp(e1.data(), e2.data(), sizeof(float) * static_cast<size_t>(k * m)) == 0);

  Tensorf s1({n, k}), s2({n, k});
  kernels::serial::softmax_rows(a.data(), s1.data(), n, k);
  kernels::par::softmax_rows(a.data(), s2.data(), n, k);
  CHECK(std::memcmp(s1.data(), s2.data(), sizeof(float) * static_cast<size_t>(n * k)) == 0);

  std::vector<int64_t> idx;
  rng::SplitMix64 gi(14);
  for (int i = 0; i < 1000; ++i)
    idx.push_back(static_cast<int64_t>(rng::bounded(gi, static_cast<uint64_t>(n))));
  Tensorf g1({1000, k}), g2({1000, k});
  kernels::serial::gather_rows(a.data(), idx.data(), g1.data(), 1000, k);
  kernels::par::gather_rows(a.data(), idx.data(), g2.data(), 1000, k);
  CHECK(std::memcmp(g1.data(), g2.data(), sizeof(float) * static_cast<size_t>(1000 * k)) == 0);

  Tensorf t1 = Tensorf::zeros({n, k}), t2 = Tensorf::zeros({n, k});
  kernels::serial::scatter_add_rows(g1.data(), idx.data(), t1.data(), 1000, k);
  kernels::par::scatter_add_rows(g1.data(), idx.data(), t2.data(), 1000, k);
  CHECK(std::memcmp(t1.data(), t2.data(), sizeof(float) * static_cast<size_t>(n * k)) == 0);

  std::vector<int64_t> offsets{0};
  int64_t pos = 0;
  while (pos < n) {
    pos = std::min<int64_t>(n, pos + 1 + static_cast<int64_t>(rng::bounded(gi, 7)));
    offsets.push_back(pos);
  }
  const int64_t n_seg = static_cast<int64_t>(offsets.size()) - 1;
  Tensorf m1({n_seg, k}), m2({n_seg, k});
  kernels::serial::segment_mean(a.data(), offsets.data(), m1.data(), n_seg, k);
  kernels::par::segment_mean(a.data(), offsets.data(), m2.data(), n_seg, k);
  CHECK(std::memcmp(m1.data(), m2.data(), sizeof(float) * static_cast<size_t>(n_seg * k)) == 0);
}

TEST_CASE("softmax rows sum to one, stay positive, and survive large inputs") {
  rng::SplitMix64 g(15);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng::bounded(g, 8));
    const int64_t m = 1 + static_cast<int64_t>(rng::bounded(g, 8));
    Tensord x = testutil::random_tensor({n, m}, g, trial % 2 ? 500.0 : 2.0);
    Tensord y({n, m});
    kernels::softmax_rows(x.data(), y.data(), n, m);
    for (int64_t i = 0; i < n; ++i) {
      double sum = 0;
      for (int64_t j = 0; j < m; ++j) {
        CHECK(y[i * m + j] > 0.0);
        sum += y[i * m + j];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}
