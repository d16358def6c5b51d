#include "dtnet/rng.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

namespace dtnet {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = eng_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

void Rng::save(std::ostream& out) const { out << eng_; }

void Rng::load(std::istream& in) { in >> eng_; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  auto splitmix = [](std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t state = seed;
  std::uint64_t h = splitmix(state);
  state ^= a + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix(state);
  state ^= b + 0xc2b2ae3d27d4eb4fULL;
  h ^= splitmix(state);
  state ^= c + 0x165667b19e3779f9ULL;
  h ^= splitmix(state);
  return h;
}

}  // namespace dtnet
