#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ippsim {

// Deterministic RNG used everywhere randomness is needed. All helpers avoid
// std::*_distribution, whose output is implementation-defined; the raw
// mt19937_64 stream is standardized, so results are identical across
// compilers and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
  // the pool sizes used here, but rejection keeps it exact.
  uint64_t uniform_int(uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices drawn uniformly from [0, n), in random order.
  std::vector<size_t> sample_indices(size_t n, size_t k);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a, used for config hashes and seed derivation tags.
uint64_t hash_str(std::string_view s);

// splitmix64-style mix, order-sensitive.
uint64_t hash_combine(uint64_t a, uint64_t b);

// Sub-seed for a named purpose, e.g. derive_seed(master, "sense", frame_id).
uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t id = 0);

std::string format_double(double v, int precision = 9);

}  // namespace ippsim
