#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ifthen {

// Seeded RNG with hand-rolled distributions. std::mt19937_64 output is
// pinned by the standard, the std distributions are not, so everything that
// must reproduce bit-for-bit (splits, shuffles, dropout masks, parameter
// init) goes through this wrapper.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased index in [0, n) via rejection sampling.
  std::size_t index(std::size_t n);

  // Box-Muller; one spare value cached.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    if (values.size() < 2) return;
    for (std::size_t i = values.size() - 1; i > 0; --i) {
      std::size_t j = index(i + 1);
      std::swap(values[i], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ifthen
