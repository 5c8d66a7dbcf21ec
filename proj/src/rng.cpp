#include "mpo_lab/rng.hpp"

namespace mpo {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

Rng derive_stream(std::uint64_t root_seed, std::string_view name, std::uint64_t index) {
  std::uint64_t s = splitmix64(root_seed ^ fnv1a64(name));
  s = splitmix64(s + index * 0x9E3779B97F4A7C15ULL);
  return Rng(s);
}

}  // namespace mpo
