#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fededs {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
inline uint64_t MixBits(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed, a purpose tag and up
// to two integer coordinates (client id, round, ...).
inline uint64_t DeriveSeed(uint64_t base, std::string_view tag, uint64_t a = 0,
                           uint64_t b = 0) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  uint64_t s = MixBits(base ^ h);
  s = MixBits(s ^ a);
  s = MixBits(s ^ (b + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace fededs
