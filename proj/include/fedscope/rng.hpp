#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace fedscope::rng {

// splitmix64 step. Every random draw in the simulator bottoms out here, so
// results do not depend on the standard library's distribution internals.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed for one purpose within one entity. Independent of execution schedule:
// the same (master, tag, ids) always yields the same stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t state = master ^ fnv1a(tag);
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t id : ids) {
    state ^= id * 0x9e3779b97f4a7c15ULL;
    out = splitmix64(state);
  }
  return out;
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1), 53 significant bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller. Uses two uniforms per draw; the first is
  // shifted into (0, 1] so the log never sees zero.
  double next_gaussian() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n). Modulo bias is irrelevant at simulator scale.
  std::int64_t next_below(std::int64_t n) {
    return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates with our own stream, so shuffles are identical on every
// platform and standard library.
template <class T>
void shuffle(std::vector<T>& values, Stream& stream) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(stream.next_below(static_cast<std::int64_t>(i)));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace fedscope::rng
