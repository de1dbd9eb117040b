#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace dynbool {

using Rng = std::mt19937_64;

/// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `s`.
std::uint64_t fnv1a(std::string_view s) noexcept;

/// Seed of the stream for (master seed, lab, replica). Stable across
/// platforms and independent of thread scheduling.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view lab,
                          std::uint64_t replica) noexcept;

Rng make_stream(std::uint64_t master_seed, std::string_view lab,
                std::uint64_t replica);

/// Deterministic family of per-replica random streams plus the worker count
/// used to evaluate them. The worker count never influences any stream.
struct ReplicaStreams {
  std::uint64_t master_seed = 0;
  std::string lab = "default";
  unsigned threads = 1;

  Rng stream(std::uint64_t replica) const {
    return make_stream(master_seed, lab, replica);
  }
  /// Independent family for a sub-experiment.
  ReplicaStreams child(std::string_view tag) const {
    return {master_seed, lab + "/" + std::string(tag), threads};
  }
};

}  // namespace dynbool
