#pragma once
// Dense kernels, each in two variants:
//   kernels::serial — plain reference loops, kept as the testing oracle
//   kernels::par    — OpenMP versions with identical per-element accumulation
//                     order, so results are bit-identical to serial at any
//                     thread count
// Dispatch wrappers pick the parallel path above a work threshold.
// tools/bench_kernels compares the two variants.

#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fms::kernels {

// Work threshold (in flops / elements touched) below which threading is
// pure overhead for these sizes.
inline constexpr int64_t kParThreshold = 1 << 16;

inline bool parallel_enabled() {
#ifdef _OPENMP
  return omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  return false;
#endif
}

namespace serial {

// c[n,m] = a[n,k] * b[k,m]
template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  for (int64_t i = 0; i < n; ++i) {
    T* ci = c + i * m;
    for (int64_t j = 0; j < m; ++j) ci[j] = T(0);
    const T* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * m;
      for (int64_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[n,m] = a[n,k] * b[m,k]^T
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  for (int64_t i = 0; i < n; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * m;
    for (int64_t j = 0; j < m; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

// c[k,m] = a[n,k]^T * b[n,m]
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  for (int64_t i = 0; i < k; ++i) {
    T* ci = c + i * m;
    for (int64_t j = 0; j < m; ++j) ci[j] = T(0);
    // accumulate over n in fixed order
    for (int64_t p = 0; p < n; ++p) {
      const T av = a[p * k + i];
      const T* bp = b + p * m;
      for (int64_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void relu(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void sigmoid(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

// Row-stable softmax over each row of x[n,m].
template <typename T>
void softmax_rows(const T* x, T* y, int64_t n, int64_t m) {
  for (int64_t i = 0; i < n; ++i) {
    const T* xi = x + i * m;
    T* yi = y + i * m;
    T mx = xi[0];
    for (int64_t j = 1; j < m; ++j) mx = xi[j] > mx ? xi[j] : mx;
    T sum = T(0);
    for (int64_t j = 0; j < m; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      sum += yi[j];
    }
    const T inv = T(1) / sum;
    for (int64_t j = 0; j < m; ++j) yi[j] *= inv;
  }
}

// y[i,:] = x[idx[i],:]
template <typename T>
void gather_rows(const T* x, const int64_t* idx, T* y, int64_t n_out, int64_t m) {
  for (int64_t i = 0; i < n_out; ++i) {
    const T* src = x + idx[i] * m;
    T* dst = y + i * m;
    for (int64_t j = 0; j < m; ++j) dst[j] = src[j];
  }
}

// dst[idx[i],:] += src[i,:]  (column-sliced parallel variant is race-free)
template <typename T>
void scatter_add_rows(const T* src, const int64_t* idx, T* dst, int64_t n_src, int64_t m) {
  for (int64_t i = 0; i < n_src; ++i) {
    const T* s = src + i * m;
    T* d = dst + idx[i] * m;
    for (int64_t j = 0; j < m; ++j) d[j] += s[j];
  }
}

// y[s,:] = mean of x rows in [offsets[s], offsets[s+1]); empty segment -> 0.
template <typename T>
void segment_mean(const T* x, const int64_t* offsets, T* y, int64_t n_seg, int64_t m) {
  for (int64_t s = 0; s < n_seg; ++s) {
    T* ys = y + s * m;
    const int64_t lo = offsets[s], hi = offsets[s + 1];
    for (int64_t j = 0; j < m; ++j) ys[j] = T(0);
    if (hi == lo) continue;
    for (int64_t r = lo; r < hi; ++r) {
      const T* xr = x + r * m;
      for (int64_t j = 0; j < m; ++j) ys[j] += xr[j];
    }
    const T inv = T(1) / static_cast<T>(hi - lo);
    for (int64_t j = 0; j < m; ++j) ys[j] *= inv;
  }
}

}  // namespace serial

namespace par {

template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    T* ci = c + i * m;
    for (int64_t j = 0; j < m; ++j) ci[j] = T(0);
    const T* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * m;
      for (int64_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * m;
    for (int64_t j = 0; j < m; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  // parallel over output rows; inner accumulation over n stays serial
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < k; ++i) {
    T* ci = c + i * m;
    for (int64_t j = 0; j < m; ++j) ci[j] = T(0);
    for (int64_t p = 0; p < n; ++p) {
      const T av = a[p * k + i];
      const T* bp = b + p * m;
      for (int64_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void relu(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void sigmoid(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t n, int64_t m) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) serial::softmax_rows(x + i * m, y + i * m, 1, m);
}

template <typename T>
void gather_rows(const T* x, const int64_t* idx, T* y, int64_t n_out, int64_t m) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n_out; ++i) {
    const T* src = x + idx[i] * m;
    T* dst = y + i * m;
    for (int64_t j = 0; j < m; ++j) dst[j] = src[j];
  }
}

// Column-sliced: thread t owns a contiguous column range, iterates all rows
// in order. No write races, accumulation order identical to serial.
template <typename T>
void scatter_add_rows(const T* src, const int64_t* idx, T* dst, int64_t n_src, int64_t m) {
#pragma omp parallel
  {
#ifdef _OPENMP
    const int nt = omp_get_num_threads();
    const int t = omp_get_thread_num();
#else
    const int nt = 1, t = 0;
#endif
    const int64_t lo = m * t / nt, hi = m * (t + 1) / nt;
    for (int64_t i = 0; i < n_src; ++i) {
      const T* s = src + i * m;
      T* d = dst + idx[i] * m;
      for (int64_t j = lo; j < hi; ++j) d[j] += s[j];
    }
  }
}

template <typename T>
void segment_mean(const T* x, const int64_t* offsets, T* y, int64_t n_seg, int64_t m) {
#pragma omp parallel for schedule(static)
  for (int64_t s = 0; s < n_seg; ++s) serial::segment_mean(x, offsets + s, y + s * m, 1, m);
}

}  // namespace par

// ---- dispatch wrappers ----

template <typename T>
void matmul(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  if (parallel_enabled() && n * k * m >= kParThreshold)
    par::matmul(a, b, c, n, k, m);
  else
    serial::matmul(a, b, c, n, k, m);
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  if (parallel_enabled() && n * k * m >= kParThreshold)
    par::matmul_nt(a, b, c, n, k, m);
  else
    serial::matmul_nt(a, b, c, n, k, m);
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  if (parallel_enabled() && n * k * m >= kParThreshold)
    par::matmul_tn(a, b, c, n, k, m);
  else
    serial::matmul_tn(a, b, c, n, k, m);
}

template <typename T>
void relu(const T* x, T* y, int64_t n) {
  if (parallel_enabled() && n >= kParThreshold)
    par::relu(x, y, n);
  else
    serial::relu(x, y, n);
}

template <typename T>
void sigmoid(const T* x, T* y, int64_t n) {
  if (parallel_enabled() && n >= kParThreshold)
    par::sigmoid(x, y, n);
  else
    serial::sigmoid(x, y, n);
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t n, int64_t m) {
  if (parallel_enabled() && n * m >= kParThreshold)
    par::softmax_rows(x, y, n, m);
  else
    serial::softmax_rows(x, y, n, m);
}

template <typename T>
void gather_rows(const T* x, const int64_t* idx, T* y, int64_t n_out, int64_t m) {
  if (parallel_enabled() && n_out * m >= kParThreshold)
    par::gather_rows(x, idx, y, n_out, m);
  else
    serial::gather_rows(x, idx, y, n_out, m);
}

template <typename T>
void scatter_add_rows(const T* src, const int64_t* idx, T* dst, int64_t n_src, int64_t m) {
  if (parallel_enabled() && n_src * m >= kParThreshold)
    par::scatter_add_rows(src, idx, dst, n_src, m);
  else
    serial::scatter_add_rows(src, idx, dst, n_src, m);
}

template <typename T>
void segment_mean(const T* x, const int64_t* offsets, T* y, int64_t n_seg, int64_t m) {
  if (parallel_enabled() && n_seg * m >= kParThreshold)
    par::segment_mean(x, offsets, y, n_seg, m);
  else
    serial::segment_mean(x, offsets, y, n_seg, m);
}

}  // namespace fms::kernels
