#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lossnet {

using Rng = std::mt19937_64;

/// Identity recorded in output metadata so runs can be audited.
inline constexpr std::string_view kGeneratorName =
    "mt19937_64<-seed_seq(seed_lo,seed_hi,index_lo,index_hi)";

/// Independent stream for replication `index` under a single 64-bit seed.
/// Streams are keyed by (seed, index) only, so results never depend on which
/// thread ran which replication.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double exponential1(Rng& rng) { return std::exponential_distribution<double>(1.0)(rng); }

inline std::int64_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

}  // namespace lossnet
