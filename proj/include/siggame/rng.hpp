#pragma once

#include <cstdint>
#include <limits>

namespace siggame {

// SplitMix64 output finalizer. A bijection on 64-bit integers.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: the i-th output is mix64(seed + (i+1) * golden).
// Streams are cheap to construct, so every (round, agent) pair gets its own
// stream and draws never depend on the order agents are processed in.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  constexpr explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Multiply-shift reduction; bound > 0.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    const auto wide = static_cast<unsigned __int128>((*this)()) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream for a (master, a, b, c) key. Each component
// passes through the bijective finalizer before being folded in.
constexpr SplitMix64 derive_stream(std::uint64_t master, std::uint64_t a,
                                   std::uint64_t b = 0,
                                   std::uint64_t c = 0) noexcept {
  std::uint64_t h = mix64(master ^ 0x5851f42d4c957f2dULL);
  h = mix64(h ^ mix64(a + 0x14057b7ef767814fULL));
  h = mix64(h ^ mix64(b + 0x2545f4914f6cdd1dULL));
  h = mix64(h ^ mix64(c + 0x9e6c63d0676a9a99ULL));
  return SplitMix64(h);
}

// Fisher-Yates shuffle with a fixed, platform-independent draw sequence.
template <class Range>
void shuffle_in_place(Range& range, SplitMix64& rng) {
  const auto n = static_cast<std::uint64_t>(range.size());
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(range[i - 1], range[j]);
  }
}

}  // namespace siggame
