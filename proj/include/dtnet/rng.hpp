#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>

namespace dtnet {

// Seeded RNG with hand-rolled float/normal conversion so that streams are
// reproducible bit-for-bit regardless of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller (cosine branch only, so the engine state
  // is the full serializable state).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  void save(std::ostream& out) const;
  void load(std::istream& in);

  bool operator==(const Rng& other) const { return eng_ == other.eng_; }

 private:
  std::mt19937_64 eng_;
};

// Deterministic stream-splitting: hashes a seed with stream tags so that
// per-sample substreams are independent of processing order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

}  // namespace dtnet
