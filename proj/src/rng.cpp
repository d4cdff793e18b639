#include "casim/rng.hpp"

#include <cmath>

namespace casim {

namespace {

// splitmix64: full-period scrambler, used both as the generator step and to
// mix seeds for derived streams.
uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  // Rejection sampling keeps the draw unbiased.
  const uint64_t bound = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<int>(x % bound);
}

double Rng::normal(double mean, double stddev) {
  // Box-Muller; u1 nudged away from zero so log stays finite.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 6.283185307179586476925286766559 * u2;
  return mean + stddev * r * std::cos(theta);
}

Rng Rng::derive(std::string_view label) const { return derive(fnv1a(label)); }

Rng Rng::derive(uint64_t salt) const {
  uint64_t s = state_ ^ (salt * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL);
  // Scramble once so nearby salts give unrelated streams.
  splitmix64(s);
  return Rng(s);
}

}  // namespace casim
