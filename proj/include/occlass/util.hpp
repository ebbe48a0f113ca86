#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace occlass {

// FNV-1a 64-bit. Stable across platforms; used for id hashing, content
// digests and the split membership function.
inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t hash_mix(uint64_t a, uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

// splitmix64 finalizer; full avalanche over the 64-bit state
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded string hash with strong diffusion. FNV alone barely scrambles short
// sequential ids, which would make split membership insensitive to the seed.
inline uint64_t stable_hash64(std::string_view s, uint64_t seed) {
  return mix64(fnv1a64(s) + 0x9e3779b97f4a7c15ULL * (seed + 1));
}

std::string to_hex(uint64_t v);

// shortest decimal that round-trips a double exactly
std::string format_double(double v);

std::string trim(std::string_view s);
std::string lower_ascii(std::string_view s);
std::vector<std::string> split_on(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string collapse_spaces(std::string_view s);  // squeeze runs of blanks, trim ends

bool read_file(const std::string& path, std::string& out);
void write_file(const std::string& path, std::string_view content);
uint64_t file_digest(const std::string& path);  // FNV-1a over raw bytes

// Chunked parallel map; threads<=1 runs inline on the calling thread, which is
// the deterministic golden path.
void parallel_for(size_t n, int threads, const std::function<void(size_t begin, size_t end)>& fn);

}  // namespace occlass
