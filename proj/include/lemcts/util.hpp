#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lemcts {

// ============================================================================
// Hashing
// ============================================================================

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, std::string_view label) {
  return splitmix64(seed ^ fnv1a64(label));
}

inline uint64_t mix_seed(uint64_t seed, uint64_t v) {
  return splitmix64(seed ^ splitmix64(v));
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// ============================================================================
// Seeded RNG stream
// ============================================================================

/**
 * Deterministic 64-bit PRNG (xoshiro-style splitmix chain).
 *
 * std::mt19937_64 is portable but the standard distributions are not; all
 * bounded/real draws here are hand-rolled so that identical seeds produce
 * identical byte streams on every platform.
 */
class RngStream {
public:
  explicit RngStream(uint64_t seed) : state_(splitmix64(seed ^ 0xa5a5a5a5a5a5a5a5ull)) {}

  uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, n). Modulo bias is negligible for the small n used here.
  size_t next_index(size_t n) { return static_cast<size_t>(next_u64() % n); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_real01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_real(double lo, double hi) { return lo + (hi - lo) * next_real01(); }

  // Independent child stream; `label` keeps substreams from colliding.
  RngStream substream(std::string_view label) const {
    return RngStream(mix_seed(state_, label));
  }

  RngStream substream(uint64_t index) const { return RngStream(mix_seed(state_, index)); }

private:
  uint64_t state_;
};

// Pure uniform draw keyed entirely by the inputs (no stream state).
inline double hash_real01(uint64_t seed, std::string_view a, std::string_view b = {},
                          std::string_view c = {}) {
  uint64_t h = splitmix64(seed);
  h = mix_seed(h, a);
  h = mix_seed(h, b);
  h = mix_seed(h, c);
  return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

// ============================================================================
// Small string helpers
// ============================================================================

inline std::string_view trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool starts_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(0, p.size()) == p;
}

inline bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

}  // namespace lemcts
