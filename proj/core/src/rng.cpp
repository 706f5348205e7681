#include "dm/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dm/error.hpp"

namespace dm {

uint64_t fnv1a64(std::string_view bytes, uint64_t seed) {
  uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t RngStream::mix_(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

RngStream RngStream::substream(uint64_t master, std::string_view name,
                               uint64_t index) {
  uint64_t h = fnv1a64(name);
  h = mix_(h ^ mix_(master));
  h = mix_(h ^ mix_(index));
  RngStream s;
  s.engine_.seed(h);
  return s;
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
  if (lo > hi) throw ShapeMismatch("uniform_int: empty range");
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
  // rejection sampling to avoid modulo bias
  uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return lo + static_cast<int64_t>(draw % span);
}

double RngStream::normal() {
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<int> RngStream::sample_without_replacement(int n, int k) {
  if (k > n) throw InsufficientData("sample_without_replacement: k > n");
  std::vector<int> pool(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
  std::vector<int> out;
  out.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    int64_t j = uniform_int(i, n - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    out.push_back(pool[static_cast<size_t>(i)]);
  }
  return out;
}

std::string RngStream::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RngStream::deserialize(const std::string& text) {
  std::istringstream is(text);
  is >> engine_;
  if (is.fail()) throw CorruptCheckpoint("bad rng state string");
}

}  // namespace dm
