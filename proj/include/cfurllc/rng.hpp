#pragma once

#include <cstdint>
#include <random>

namespace cfurllc {

/// Purposes that get an independent random stream from one master seed.
enum class Stream : std::uint64_t {
  kApPositions = 1,
  kDevicePositions = 2,
  kShadowing = 3,
  kWeights = 4,
  kFading = 5,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Sub-stream seed: mix64(mix64(master) ^ mix64(stream * golden + index)).
/// Stable across platforms; the engine on top is std::mt19937_64.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(master) ^ mix64(stream * 0x9e3779b97f4a7c15ULL + index));
}

inline std::mt19937_64 make_engine(std::uint64_t master, Stream stream,
                                   std::uint64_t index = 0) {
  return std::mt19937_64(
      derive_seed(master, static_cast<std::uint64_t>(stream), index));
}

}  // namespace cfurllc
