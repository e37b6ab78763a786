#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace absopf {

/// Counter-based generator: the n-th output of a stream is a pure function of
/// (key, n), so substreams can be handed to workers without changing what
/// any of them draws. Output mixing is the SplitMix64 finalizer.
///
/// Satisfies UniformRandomBitGenerator. Floating-point helpers below are
/// implemented here rather than through <random> distributions so results do
/// not depend on the standard library vendor.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed = 0) noexcept;

  /// Independent stream keyed by (this stream's key, id). Does not advance
  /// the parent.
  CounterRng substream(std::uint64_t id) const noexcept;

  result_type operator()() noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, one value per call).
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  CounterRng(std::uint64_t key, std::uint64_t counter, int) noexcept : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates with CounterRng::below.
template <class T>
void shuffle(std::span<T> items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Stream ids used across the library, so experiments cannot accidentally
/// reuse a stream for two purposes.
namespace streams {
inline constexpr std::uint64_t kInitialSet = 1;
inline constexpr std::uint64_t kValidationSet = 2;
inline constexpr std::uint64_t kTestSet = 3;
inline constexpr std::uint64_t kNetworkInit = 4;
inline constexpr std::uint64_t kTraining = 5;
inline constexpr std::uint64_t kAcquisition = 6;
inline constexpr std::uint64_t kScoring = 7;
inline constexpr std::uint64_t kInactiveSet = 8;
}  // namespace streams

}  // namespace absopf
