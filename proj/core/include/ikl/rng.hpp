#pragma once

#include <array>
#include <cstdint>

namespace ikl {

// xoshiro256** seeded through splitmix64.
//
// Seeding: the four state words are the first four outputs of splitmix64
// started at `seed`. Independent streams for the same seed are derived with
// `Rng(seed, stream)`, which seeds splitmix64 with seed ^ (stream * 0x9E3779B97F4A7C15).
//
// uniform() returns (next() >> 11) * 2^-53. normal() uses the Box-Muller
// transform on u1 = 1 - uniform(), u2 = uniform(); the cosine branch is
// returned first and the sine branch is cached for the next call.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next();
  double uniform();
  double normal();

  static constexpr std::uint64_t kDataStream = 1;
  static constexpr std::uint64_t kTrainStream = 2;
  static constexpr std::uint64_t kInitStream = 3;
  static constexpr std::uint64_t kEvalStream = 4;

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace ikl
