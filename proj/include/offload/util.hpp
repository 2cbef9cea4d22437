#ifndef OFFLOAD_UTIL_HPP_
#define OFFLOAD_UTIL_HPP_

#include <cstdint>
#include <initializer_list>
#include <string>

namespace offload {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable seed derivation for independent random streams.
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> salts) {
  std::uint64_t state = base;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t salt : salts) {
    state ^= salt + 0x9e3779b97f4a7c15ULL + (state << 6) + (state >> 2);
    out = splitmix64(state);
  }
  return out;
}

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace offload

#endif  // OFFLOAD_UTIL_HPP_
