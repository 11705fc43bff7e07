#include "tot/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "tot/errors.hpp"

namespace tot {

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::uniform_index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % bound);
}

std::size_t Rng::uniform_between(std::size_t lo, std::size_t hi) {
  if (hi < lo) throw ContractError("Rng::uniform_between: hi < lo");
  return lo + uniform_index(hi - lo + 1);
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Rng Rng::fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

}  // namespace tot
