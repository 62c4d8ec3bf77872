#pragma once

#include <cstdint>
#include <random>

namespace rcp {

using Rng = std::mt19937_64;

// Independent sub-streams of one repetition seed. Fixed ids keep runs
// bit-reproducible no matter which stages are enabled.
enum class Stream : std::uint64_t {
  kModel = 1,       // per-experiment fixed parameters (W, beta, vertices)
  kData = 2,        // feature/label sampling
  kCorruption = 3,  // label noise
  kScoring = 4,     // APS randomization and tie jitter
  kSubsample = 5,   // ingest subsampling
  kTraining = 6,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  const auto s = static_cast<std::uint64_t>(stream);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace rcp
