#pragma once

// Counter-based random streams.
//
// Every random decision in a run is a pure function of (seed, tag, keys...),
// so the outcome of one decision never depends on how many other decisions
// were drawn before it. This is what makes the data stream and the schedule
// stream independent (the oblivious-adversary property) and lets different
// schemes observe identical lateness/crash draws under a shared schedule seed.

#include <cstdint>
#include <initializer_list>

namespace elastic {

/// SplitMix64 finalizer (Steele, Lea & Flood).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Draw tags. Values are part of the reproducibility contract: changing one
/// changes every seeded trajectory that uses it.
enum class DrawTag : std::uint64_t {
  sample = 1,       // data: sample index for (t, node)
  crash = 2,        // sched: does node crash at t
  reach = 3,        // sched: does a crashing node's message reach receiver
  late = 4,         // sched: is message (t, sender -> receiver) late/withheld
  drop = 5,         // sched: is a withheld message lost for good
  release = 6,      // sched: geometric release trials for a withheld message
  delay = 7,        // sched: async delay of message (t, sender -> receiver)
  coordinate = 8,   // sched: per-coordinate staleness in shared memory
  trial = 9,        // harness: per-trial seed derivation
};

class CounterStream {
 public:
  constexpr explicit CounterStream(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  constexpr std::uint64_t bits(DrawTag tag, std::initializer_list<std::uint64_t> keys) const noexcept {
    std::uint64_t h = mix64(seed_ ^ 0x6A09E667F3BCC909ULL);
    h = mix64(h ^ static_cast<std::uint64_t>(tag));
    for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x243F6A8885A308D3ULL));
    return h;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform(DrawTag tag, std::initializer_list<std::uint64_t> keys) const noexcept {
    return static_cast<double>(bits(tag, keys) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Multiply-shift reduction; bias is below 2^-32
  /// for every n used here.
  std::uint64_t below(std::uint64_t n, DrawTag tag, std::initializer_list<std::uint64_t> keys) const noexcept {
    const unsigned __int128 wide = static_cast<unsigned __int128>(bits(tag, keys)) * n;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Child stream for an independent sub-experiment (trial k of a base seed).
  constexpr CounterStream split(std::uint64_t index) const noexcept {
    return CounterStream(bits(DrawTag::trial, {index}));
  }

 private:
  std::uint64_t seed_;
};

}  // namespace elastic
