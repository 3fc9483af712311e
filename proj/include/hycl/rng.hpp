#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "hycl/common.hpp"

namespace hycl {

// Counter-based generator built on the splitmix64 finalizer. Streams are
// derived by hashing (parent seed, tag) pairs, so a run can hand out
// independent child generators for (epoch, view, sampler, ...) and replay
// them exactly from the run seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return finalize(state_);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool next_bernoulli(double p) { return next_double() < p; }

  // Uniform in [0, n) without modulo bias.
  std::uint64_t next_below(std::uint64_t n) {
    check_contract(n > 0, "Rng::next_below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const unsigned __int128 m =
          static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
      if (static_cast<std::uint64_t>(m) >= threshold)
        return static_cast<std::uint64_t>(m >> 64);
    }
  }

  Index next_index(Index n) { return static_cast<Index>(next_below(static_cast<std::uint64_t>(n))); }

  // Standard normal via Box-Muller; the paired draw is cached.
  double next_gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  static std::uint64_t finalize(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  static std::uint64_t derive(std::uint64_t parent, std::uint64_t tag) {
    return finalize(finalize(parent + 0x632be59bd9b4e019ULL) ^ finalize(tag));
  }

  static std::uint64_t derive(std::uint64_t parent, std::string_view tag) {
    // FNV-1a over the tag bytes, then mixed with the parent.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : tag) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ULL;
    }
    return derive(parent, h);
  }

  template <typename Tag, typename... Tags>
    requires(sizeof...(Tags) >= 1)
  static std::uint64_t derive(std::uint64_t parent, Tag tag, Tags... rest) {
    return derive(derive(parent, tag), rest...);
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace hycl
