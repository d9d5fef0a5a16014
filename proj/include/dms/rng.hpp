#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

namespace dms {

/// Seeded random stream keyed by (seed, purpose label, index path).
///
/// Two streams built from the same identity produce the same draws. Child
/// streams obtained with derive() depend only on the parent's identity, never
/// on how many values the parent has already produced, so a stream can be
/// handed out per sample or per pass without ordering effects.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

  [[nodiscard]] RngStream derive(std::uint64_t index) const;

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform draw in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal draw.
  double normal();
  bool bernoulli(double p);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    std::shuffle(first, last, engine_);
  }

 private:
  struct FromKey {};
  RngStream(FromKey, std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t mix64(std::uint64_t x);

}  // namespace dms
