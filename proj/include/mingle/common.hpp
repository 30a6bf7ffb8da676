#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mingle {

// Error taxonomy mapped to CLI exit codes: usage=1, data=2, provider=3, numeric=4.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ProviderError : std::runtime_error {
  std::vector<std::string> failed_keys;
  explicit ProviderError(const std::string& msg, std::vector<std::string> keys = {})
      : std::runtime_error(msg), failed_keys(std::move(keys)) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable substream derivation: mix(seed, tag) seeds an independent generator.
inline uint64_t mix64(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) { return mix64(mix64(a, b), c); }

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform in the open interval (0,1). mt19937_64 output streams are pinned by
// the standard, so everything seeded through here reproduces bit-exactly.
inline double u01(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Box-Muller; draws two uniforms per call.
inline double normal01(std::mt19937_64& g) {
  double u1 = u01(g);
  double u2 = u01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Fisher-Yates with an explicit engine; std::shuffle is not reproducible
// across standard library implementations.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& g) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(g() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace mingle
