#include "dynbool/rng.hpp"

namespace dynbool {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view lab,
                          std::uint64_t replica) noexcept {
  return mix64(mix64(mix64(master_seed) ^ fnv1a(lab)) + replica);
}

Rng make_stream(std::uint64_t master_seed, std::string_view lab,
                std::uint64_t replica) {
  const std::uint64_t s = derive_seed(master_seed, lab, replica);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(mix64(s)),
                    static_cast<std::uint32_t>(mix64(s) >> 32)};
  return Rng(seq);
}

}  // namespace dynbool
