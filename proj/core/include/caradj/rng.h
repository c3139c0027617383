#ifndef CARADJ_RNG_H_
#define CARADJ_RNG_H_

#include <cstdint>
#include <random>

namespace caradj {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t SplitMix64(std::uint64_t x);

// Seed of stream `stream` under `master`:
//   SplitMix64(master + (stream + 1) * 0x9E3779B97F4A7C15).
// Distinct streams give statistically independent mt19937_64 sequences, so
// replicate r of a scenario does not depend on which thread runs it.
std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t stream);

// Uniform on [0, 1) with 53 random bits. Implemented here rather than via
// std::uniform_real_distribution so draws are identical across standard
// libraries.
double Uniform01(Rng& rng);

// Uniform integer in [0, bound).
int UniformIndex(Rng& rng, int bound);

inline bool Bernoulli(Rng& rng, double p) { return Uniform01(rng) < p; }

}  // namespace caradj

#endif  // CARADJ_RNG_H_
