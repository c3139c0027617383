#include "caradj/rng.h"

namespace caradj {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t stream) {
  return SplitMix64(master + (stream + 1) * 0x9E3779B97F4A7C15ULL);
}

double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int UniformIndex(Rng& rng, int bound) {
  // Lemire's multiply-shift with rejection; exact for any bound < 2^32.
  const std::uint64_t range = static_cast<std::uint64_t>(bound);
  std::uint64_t x = rng() >> 32;
  std::uint64_t m = x * range;
  std::uint64_t low = m & 0xFFFFFFFFULL;
  if (low < range) {
    const std::uint64_t threshold = (0x100000000ULL - range) % range;
    while (low < threshold) {
      x = rng() >> 32;
      m = x * range;
      low = m & 0xFFFFFFFFULL;
    }
  }
  return static_cast<int>(m >> 32);
}

}  // namespace caradj
