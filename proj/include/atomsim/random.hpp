#pragma once

// Counter-based random state. Output depends only on (seed, stream, position),
// so frames and sensors can be regenerated independently and in any order.

#include <array>
#include <cstdint>

namespace atomsim {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace detail

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32_10(
    std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53U;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo32(kMul0, counter[0], hi0, lo0);
    detail::mulhilo32(kMul1, counter[2], hi1, lo1);
    counter = {hi1 ^ counter[1] ^ key[0], lo1, hi0 ^ counter[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return counter;
}

/// Deterministic generator state. Identical (seed, stream) pairs produce
/// identical sequences on every platform. Single owner; fork for parallel use.
class RandomState {
 public:
  explicit RandomState(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Independent sub-stream `k`. Depends only on (seed, stream, k), not on
  /// how far this state has advanced.
  RandomState fork(std::uint64_t k) const {
    const std::uint64_t child =
        detail::splitmix64(detail::splitmix64(stream_ ^ 0x6A09E667F3BCC909ULL) + k);
    return RandomState(seed_, child);
  }

  std::uint64_t next_u64() {
    if (buffered_ == 0) refill();
    --buffered_;
    return words_[buffered_];
  }

  /// Uniform deviate in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform deviate in the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool operator==(const RandomState&) const = default;

 private:
  void refill() {
    const auto block = philox4x32_10(
        {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
        {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    ++counter_;
    // Consumed from the back: words_[1] first, then words_[0].
    words_[1] = (static_cast<std::uint64_t>(block[1]) << 32) | block[0];
    words_[0] = (static_cast<std::uint64_t>(block[3]) << 32) | block[2];
    buffered_ = 2;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> words_{};
  int buffered_ = 0;
};

inline double uniform_next(RandomState& state) { return state.uniform(); }

}  // namespace atomsim
