#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace tot {

// Seeded generator with distribution code written out by hand so that the
// same seed yields the same stream under any standard library
// (std::uniform_int_distribution and friends are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  // Uniform integer in [lo, hi], inclusive.
  std::size_t uniform_between(std::size_t lo, std::size_t hi);
  // Uniform real in [0, 1).
  double uniform01();
  double normal();

  // Independent child stream derived from this one.
  Rng fork();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tot
