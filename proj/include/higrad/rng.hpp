#pragma once

// Deterministic, splittable random streams.
//
// Every consumer of randomness owns a private stream keyed by
// (run seed, purpose tag, integer path).  Streams never share state, so the
// schedule in which segments or replicates execute cannot change the numbers
// any of them draw.  All generation is explicit integer arithmetic on
// uint64_t; no <random> engines or distributions are used, because their
// sequences are implementation-defined and would break bitwise
// reproducibility of saved results.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace higrad {

// One step of the splitmix64 sequence; also the finalizer used by the key
// derivation below.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Well-separated purpose tags for deriving independent streams from one seed.
namespace stream_tag {
inline constexpr std::uint64_t theta0 = 0x74683000aa51c5f1ULL;
inline constexpr std::uint64_t segment_data = 0x7365671b3ce2a9d3ULL;
inline constexpr std::uint64_t test_points = 0x7465737452f0e697ULL;
inline constexpr std::uint64_t replicate = 0x7265706cc41d7b25ULL;
inline constexpr std::uint64_t shuffle = 0x73687566f8a3d1b9ULL;
}  // namespace stream_tag

// Collapses (seed, tag, path...) into a single 64-bit stream key.  Each word
// is absorbed through a full splitmix64 round, so keys for different paths
// or tags are unrelated for all practical purposes.
inline std::uint64_t derive_stream_key(std::uint64_t seed, std::uint64_t tag,
                                       std::span<const long long> path = {}) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;  // arbitrary nonzero start
  auto absorb = [&h](std::uint64_t word) {
    h ^= word;
    (void)splitmix64_next(h);
  };
  absorb(seed);
  absorb(tag);
  absorb(static_cast<std::uint64_t>(path.size()));
  for (long long p : path) absorb(static_cast<std::uint64_t>(p));
  std::uint64_t out = h;
  return splitmix64_next(out);
}

inline std::uint64_t derive_stream_key(std::uint64_t seed, std::uint64_t tag,
                                       std::initializer_list<long long> path) {
  return derive_stream_key(seed, tag, std::span<const long long>(path.begin(), path.size()));
}

// xoshiro256++ by Blackman and Vigna: fast, tiny state, passes BigCrush.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t key) {
    // Seed the four state words from splitmix64, per the authors' advice.
    std::uint64_t s = key;
    for (auto& word : state_) word = splitmix64_next(s);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

// A private stream of uniforms and normals.  Copyable; copies continue
// independently from the same point.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : engine_(key) {}

  std::uint64_t next_u64() { return engine_.next(); }

  // Uniform on [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(engine_.next() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to pass to log().
  double uniform_positive() {
    return (static_cast<double>(engine_.next() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound) via the multiply-shift map.  The tiny
  // modulo bias (< 2^-64 * bound) is irrelevant here and the map keeps the
  // draw a pure function of one engine output.
  std::uint64_t uniform_index(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_.next()) * bound) >> 64);
  }

  // Standard normal via Box-Muller.  Pairs are generated together and the
  // second value cached, so each call consumes a fixed amount of engine
  // output regardless of the values drawn.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_positive();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  Xoshiro256pp engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace higrad
