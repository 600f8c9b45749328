#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedpt {

using Rng = std::mt19937_64;

/// Stream tags keep independent consumers of one (trial, round) apart.
enum class StreamTag : std::uint64_t {
  kSuite = 1,
  kSampling = 2,
  kClientStep = 3,
  kProbe = 4,
  kTrial = 5,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a seed path, e.g. (master, tag, trial, round, client, step).
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

inline Rng make_stream(std::uint64_t master, StreamTag tag, std::uint64_t trial,
                       std::uint64_t round, std::uint64_t client, std::uint64_t step) {
  return Rng(derive_seed({master, static_cast<std::uint64_t>(tag), trial, round, client, step}));
}

}  // namespace fedpt
