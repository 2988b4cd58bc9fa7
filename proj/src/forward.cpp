#include "lossnet/forward.hpp"

#include <algorithm>
#include <queue>
#include <string>

namespace lossnet {

namespace {

bool birth_order(const Rect& l, const Rect& r) {
  if (l.birth != r.birth) return l.birth < r.birth;
  if (l.xi != r.xi) return l.xi < r.xi;
  return l.id < r.id;
}

void require_complete(const Clan& clan) {
  if (clan.status != ClanStatus::Complete)
    throw CappedError(clan.sampled, clan.sampled);
}

}  // namespace

CappedError::CappedError(std::int64_t sampled_, std::int64_t cap_)
    : std::runtime_error("clan construction capped after " + std::to_string(sampled_) +
                         " sampled cylinders; no perfect sample available"),
      sampled(sampled_),
      cap(cap_) {}

std::vector<Rect> clean(const Clan& clan, int capacity) {
  require_complete(clan);
  if (capacity < 1) throw ModelError("capacity must be >= 1");

  std::vector<Rect> order = clan.rects;
  std::sort(order.begin(), order.end(), birth_order);

  std::vector<Rect> kept;
  // Active = kept and not yet dead at the current birth instant. Expired
  // entries are dropped lazily by death time.
  std::vector<Rect> active;
  using Entry = std::pair<double, std::int64_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> deaths;

  for (const auto& r : order) {
    if (!deaths.empty() && deaths.top().first < r.birth) {
      while (!deaths.empty() && deaths.top().first < r.birth) deaths.pop();
      std::erase_if(active, [&](const Rect& k) { return k.death < r.birth; });
    }
    if (blocks(r, active, capacity)) continue;
    kept.push_back(r);
    active.push_back(r);
    deaths.emplace(r.death, r.id);
  }
  return kept;
}

std::vector<Rect> clean_delete_neighbours(const Clan& clan) {
  require_complete(clan);
  std::vector<Rect> pending = clan.rects;
  std::sort(pending.begin(), pending.end(), birth_order);
  std::vector<Rect> kept;
  while (!pending.empty()) {
    const Rect first = pending.front();
    pending.erase(pending.begin());
    kept.push_back(first);
    std::erase_if(pending, [&](const Rect& r) { return intersects(r, first); });
  }
  return kept;
}

Configuration extract_sample(const std::vector<Rect>& kept, const Window& window) {
  Configuration config;
  for (const auto& r : kept) {
    if (!r.alive_at(0.0)) continue;
    if (r.xi < window.b && r.right() > window.a) config.calls.push_back({r.xi, r.right()});
  }
  std::sort(config.calls.begin(), config.calls.end(),
            [](const Interval& l, const Interval& r) { return l.left < r.left; });
  return config;
}

PerfectSample perfect_sample(const Window& window, const ModelParams& params,
                             std::uint64_t seed, const ClanOptions& options) {
  Rng rng = make_stream(seed, 0);
  Clan clan = build_clan(window, params, rng, options);
  if (clan.status != ClanStatus::Complete) throw CappedError(clan.sampled, options.cap);
  auto kept = clean(clan, params.capacity);
  PerfectSample s{window, extract_sample(kept, window), clan.size(), clan.max_generation() + 1};
  return s;
}

nlohmann::json sample_to_json(const PerfectSample& s, const ModelParams& params,
                              std::uint64_t seed) {
  auto calls = nlohmann::json::array();
  for (const auto& c : s.config.calls) calls.push_back({c.left, c.right});
  return {{"window", {s.window.a, s.window.b}},
          {"lambda", params.lambda},
          {"capacity", params.capacity},
          {"pi", params.pi.to_json()},
          {"seed", seed},
          {"calls", std::move(calls)},
          {"clan_size", s.clan_size},
          {"generations", s.generations}};
}

}  // namespace lossnet
