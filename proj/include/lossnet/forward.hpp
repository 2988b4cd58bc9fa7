#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "lossnet/backward.hpp"
#include "lossnet/model.hpp"

namespace lossnet {

/// Thrown when a complete clan was required but the construction hit its cap.
class CappedError : public std::runtime_error {
 public:
  CappedError(std::int64_t sampled, std::int64_t cap);
  std::int64_t sampled;
  std::int64_t cap;
};

/// Birth-order greedy admission under capacity C. Ties in birth are broken by
/// (xi, id). Rejects capped clans.
std::vector<Rect> clean(const Clan& clan, int capacity);

/// C = 1 cleaning as a literal delete-neighbours loop: take the earliest
/// remaining cylinder, keep it, and discard everything it intersects.
/// Quadratic; kept as an independent cross-check of `clean`.
std::vector<Rect> clean_delete_neighbours(const Clan& clan);

/// Bases of kept cylinders alive at time 0 that meet the window.
Configuration extract_sample(const std::vector<Rect>& kept, const Window& window);

struct PerfectSample {
  Window window;
  Configuration config;
  std::size_t clan_size = 0;
  int generations = 0;
};

PerfectSample perfect_sample(const Window& window, const ModelParams& params,
                             std::uint64_t seed, const ClanOptions& options = {});

nlohmann::json sample_to_json(const PerfectSample& s, const ModelParams& params,
                              std::uint64_t seed);

}  // namespace lossnet
