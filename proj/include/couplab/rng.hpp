#pragma once

// Deterministic per-path random number streams. Each stream is keyed by
// (master seed, path index, channel); distinct keys give statistically
// independent sequences and the same key always replays the same sequence,
// so batch results are independent of worker count and batching order.
//
// Generator: xoshiro256++ seeded through splitmix64 from the mixed key.
// Gaussians via Box-Muller with a one-deep cache; everything here is
// hand-rolled so sequences are bit-identical across platforms (the
// standard library distributions are not).

#include <cmath>
#include <cstdint>

namespace couplab {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace detail

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t path_index, std::uint64_t channel) {
    std::uint64_t key = seed;
    key = detail::splitmix64(key) ^ (path_index * 0xd1342543de82ef95ULL);
    key = detail::splitmix64(key) ^ (channel * 0xaf251af3b0f025b5ULL);
    for (auto& word : s_) word = detail::splitmix64(key);
  }

  std::uint64_t next_u64() {
    std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  // Uniform on (0, 1); never returns 0 so log() below is safe.
  double uniform() {
    double u = (next_u64() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * 3.14159265358979323846 * u2;
    cached_ = rad * std::sin(ang);
    have_cached_ = true;
    return rad * std::cos(ang);
  }

 private:
  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace couplab
