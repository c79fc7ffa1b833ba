// Timing comparison between the serial reference kernels and the OpenMP
// variants, at sizes matching real propagation workloads and larger.
// Also verifies on the spot that both variants agree bitwise.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fms/kernels.hpp"
#include "fms/rng.hpp"
#include "fms/tensor.hpp"

using namespace fms;

namespace {

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Tensorf random_matrix(int64_t n, int64_t m, uint64_t seed) {
  Tensorf t({n, m});
  rng::SplitMix64 g(seed);
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(2.0 * rng::next_double(g) - 1.0);
  return t;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e30;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now();
    fn();
    best = std::min(best, now() - t0);
  }
  return best;
}

void bench_matmul(int64_t n, int64_t k, int64_t m) {
  const Tensorf a = random_matrix(n, k, 1);
  const Tensorf b = random_matrix(k, m, 2);
  Tensorf c1({n, m}), c2({n, m});
  const double ts = time_best_of(5, [&] {
    kernels::serial::matmul(a.data(), b.data(), c1.data(), n, k, m);
  });
  const double tp = time_best_of(5, [&] {
    kernels::par::matmul(a.data(), b.data(), c2.data(), n, k, m);
  });
  const bool same = std::memcmp(c1.data(), c2.data(), sizeof(float) * static_cast<size_t>(n * m)) == 0;
  const double gflop = 2.0 * static_cast<double>(n) * k * m / 1e9;
  std::printf("matmul %5ldx%ldx%-5ld  serial %8.3f ms (%5.2f GF/s)  omp %8.3f ms (%5.2f GF/s)  x%4.2f  %s\n",
              static_cast<long>(n), static_cast<long>(k), static_cast<long>(m), ts * 1e3,
              gflop / ts, tp * 1e3, gflop / tp, ts / tp, same ? "bitwise-equal" : "MISMATCH");
}

void bench_softmax(int64_t n, int64_t m) {
  const Tensorf x = random_matrix(n, m, 3);
  Tensorf y1({n, m}), y2({n, m});
  const double ts = time_best_of(5, [&] {
    kernels::serial::softmax_rows(x.data(), y1.data(), n, m);
  });
  const double tp = time_best_of(5, [&] {
    kernels::par::softmax_rows(x.data(), y2.data(), n, m);
  });
  const bool same = std::memcmp(y1.data(), y2.data(), sizeof(float) * static_cast<size_t>(n * m)) == 0;
  std::printf("softmax_rows %7ldx%-4ld     serial %8.3f ms                omp %8.3f ms                x%4.2f  %s\n",
              static_cast<long>(n), static_cast<long>(m), ts * 1e3, tp * 1e3, ts / tp,
              same ? "bitwise-equal" : "MISMATCH");
}

void bench_segment_mean(int64_t rows, int64_t seg, int64_t m) {
  const Tensorf x = random_matrix(rows, m, 4);
  std::vector<int64_t> offsets;
  for (int64_t i = 0; i <= seg; ++i) offsets.push_back(i * rows / seg);
  Tensorf y1({seg, m}), y2({seg, m});
  const double ts = time_best_of(5, [&] {
    kernels::serial::segment_mean(x.data(), offsets.data(), y1.data(), seg, m);
  });
  const double tp = time_best_of(5, [&] {
    kernels::par::segment_mean(x.data(), offsets.data(), y2.data(), seg, m);
  });
  const bool same = std::memcmp(y1.data(), y2.data(), sizeof(float) * static_cast<size_t>(seg * m)) == 0;
  std::printf("segment_mean %6ld->%-6ld  serial %8.3f ms                omp %8.3f ms                x%4.2f  %s\n",
              static_cast<long>(rows), static_cast<long>(seg), ts * 1e3, tp * 1e3, ts / tp,
              same ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns run the serial path\n\n");
#endif
  // batch-propagation scale: ~30k edge rows, d=64
  bench_matmul(32768, 64, 64);
  bench_matmul(262144, 64, 64);
  bench_matmul(512, 512, 512);
  std::printf("\n");
  bench_softmax(32768, 64);
  bench_softmax(4096, 1024);
  std::printf("\n");
  bench_segment_mean(262144, 32768, 64);
  bench_segment_mean(32768, 4096, 64);
  return 0;
}
