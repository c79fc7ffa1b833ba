#pragma once
// Counter-based deterministic random number utilities.
//
// Every stochastic decision in the project draws from a SplitMix64 stream
// whose seed is derived by hashing a (master seed, purpose tag, indices...)
// tuple. Substreams are therefore independent of iteration order and thread
// count: adding a node to a frontier or changing OMP_NUM_THREADS never
// perturbs anyone else's draws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <utility>
#include <vector>

namespace fms::rng {

struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

  uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

// Hash-combine for substream derivation.
inline uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t mix(uint64_t a, uint64_t b, uint64_t c) { return mix(mix(a, b), c); }
inline uint64_t mix(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return mix(mix(a, b, c), d);
}

// FNV-1a over a tag string, for naming substreams ("ctx", "flow", ...).
inline uint64_t tag(const char* s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (; *s; ++s) h = (h ^ static_cast<uint64_t>(*s)) * 0x100000001b3ull;
  return h;
}

// Uniform in [0, 1).
inline double next_double(SplitMix64& g) {
  return static_cast<double>(g.next() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) without modulo bias (Lemire).
inline uint64_t bounded(SplitMix64& g, uint64_t n) {
  if (n <= 1) return 0;
  unsigned __int128 m = static_cast<unsigned __int128>(g.next()) * n;
  uint64_t lo = static_cast<uint64_t>(m);
  if (lo < n) {
    uint64_t t = (0 - n) % n;
    while (lo < t) {
      m = static_cast<unsigned __int128>(g.next()) * n;
      lo = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

// Box-Muller pair of standard normals.
inline std::pair<double, double> next_normal2(SplitMix64& g) {
  double u1 = next_double(g);
  while (u1 <= 0.0) u1 = next_double(g);
  const double u2 = next_double(g);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

inline double next_normal(SplitMix64& g) { return next_normal2(g).first; }

// In-place Fisher-Yates; std::shuffle's draw pattern is unspecified, this is not.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& g) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(bounded(g, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Uniform k-subset of {0, ..., n-1} via Floyd's algorithm, returned sorted.
// O(k) draws and O(k^2) worst-case membership checks; k is small here.
inline std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k, SplitMix64& g) {
  std::vector<int64_t> out;
  if (k >= n) {
    out.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = i;
    return out;
  }
  out.reserve(static_cast<size_t>(k));
  for (int64_t i = n - k; i < n; ++i) {
    const int64_t j = static_cast<int64_t>(bounded(g, static_cast<uint64_t>(i) + 1));
    bool seen = false;
    for (int64_t v : out) {
      if (v == j) { seen = true; break; }
    }
    out.push_back(seen ? i : j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fms::rng
