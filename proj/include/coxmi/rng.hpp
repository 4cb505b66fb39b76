#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace coxmi {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for the worker stream identified by (tag, index) under a master seed.
// Streams for distinct (tag, index) pairs are independent for practical
// purposes, which makes parallel replicates reproducible regardless of the
// worker count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ (tag + 0x9E3779B97F4A7C15ULL));
  return splitmix64(s ^ index);
}

// FNV-1a, for naming substreams by purpose.
inline std::uint64_t tag_hash(std::string_view tag) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
  return derive_seed(master, tag_hash(tag), index);
}

// mt19937_64 with explicit variate transforms. The standard library's
// distribution objects are implementation-defined, so rolling the transforms
// keeps seeded runs bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

  // [0, n); multiply-shift, bias O(n / 2^64)
  std::size_t uniform_index(std::size_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::size_t>((static_cast<u128>(engine_()) * n) >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace coxmi
