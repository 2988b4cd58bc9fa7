#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lossnet/model.hpp"
#include "lossnet/region.hpp"
#include "lossnet/rng.hpp"

namespace lossnet {

inline constexpr std::int64_t kDefaultCap = 1'000'000;

enum class ClanStatus { Complete, Capped };

/// Clan of ancestors of a window at time 0.
///
/// Edges are (child id, ancestor id): the ancestor was born no later than the
/// child and the two cylinders intersect. Generation is the BFS depth from
/// the roots along edges.
struct Clan {
  std::vector<Rect> rects;
  std::vector<std::int64_t> roots;
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  Region explored_region;
  std::vector<Interval> explored_zero_interval;
  ClanStatus status = ClanStatus::Complete;
  /// Number of exploration rounds performed (generation-0 sampling excluded).
  int iterations = 0;
  /// Total number of free-process cylinders sampled, including pruned ones.
  std::int64_t sampled = 0;

  [[nodiscard]] std::size_t size() const { return rects.size(); }
  [[nodiscard]] int max_generation() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

struct ClanOptions {
  std::int64_t cap = kDefaultCap;
  /// Drop freshly sampled cylinders born no later than the earliest birth of
  /// the previous frontier. Off by default: it can discard true ancestors.
  bool restrict_to_later_births = false;
};

/// Monotone id source for cylinders created during one construction.
class IdSource {
 public:
  std::int64_t next() { return next_++; }

 private:
  std::int64_t next_ = 0;
};

/// Cylinders alive at time 0 whose left end falls in (lo, hi). Their lives are
/// [-age, 0]; ages are Exp(1) by stationarity.
std::vector<Rect> sample_alive_at_zero(Interval strip, const ModelParams& params, Rng& rng,
                                       IdSource& ids);

/// Cylinders whose death marks form a rate-lambda Poisson process on `region`.
std::vector<Rect> sample_deaths_in_region(const Region& region, const ModelParams& params,
                                          Rng& rng, IdSource& ids);

/// Every potential ancestor of r dies inside this box or is alive at 0 with its
/// left end in (xi - H, xi + u).
Region influence_region(const Rect& r, double H);

Clan build_clan(const Window& window, const ModelParams& params, Rng& rng,
                const ClanOptions& options = {});
Clan build_point_clan(double x, const ModelParams& params, Rng& rng,
                      const ClanOptions& options = {});

/// Restricts to cylinders reachable from the roots; generations become BFS depths.
Clan ancestor_closure(std::vector<Rect> rects,
                      std::vector<std::pair<std::int64_t, std::int64_t>> edges,
                      std::vector<std::int64_t> roots);

}  // namespace lossnet
