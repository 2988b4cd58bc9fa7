#include "lossnet/backward.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

namespace lossnet {

namespace {

/// Buckets cylinders by (left end / H, unit time slab) over every slab their
/// life touches, so "alive at t with left end in (lo, hi)" is a local lookup.
class LifeIndex {
 public:
  explicit LifeIndex(double width) : width_(width) {}

  void insert(const Rect& r, std::int32_t idx) {
    const std::int64_t ix = x_bucket(r.xi);
    for (std::int64_t it = t_bucket(r.birth); it <= t_bucket(r.death); ++it)
      cells_[key(ix, it)].push_back(idx);
  }

  template <class Fn>
  void for_each_alive(double lo, double hi, double t, Fn&& fn) const {
    const std::int64_t it = t_bucket(t);
    for (std::int64_t ix = x_bucket(lo); ix <= x_bucket(hi); ++ix) {
      auto found = cells_.find(key(ix, it));
      if (found == cells_.end()) continue;
      for (std::int32_t idx : found->second) fn(idx);
    }
  }

 private:
  struct Key {
    std::int64_t ix;
    std::int64_t it;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      auto h = static_cast<std::uint64_t>(k.ix) * 0x9E3779B97F4A7C15ULL;
      h ^= static_cast<std::uint64_t>(k.it) + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };

  static Key key(std::int64_t ix, std::int64_t it) { return {ix, it}; }
  [[nodiscard]] std::int64_t x_bucket(double x) const {
    return static_cast<std::int64_t>(std::floor(x / width_));
  }
  static std::int64_t t_bucket(double t) { return static_cast<std::int64_t>(std::floor(t)); }

  double width_;
  std::unordered_map<Key, std::vector<std::int32_t>, KeyHash> cells_;
};

}  // namespace

int Clan::max_generation() const {
  int g = -1;
  for (const auto& r : rects) g = std::max(g, r.generation);
  return g;
}

nlohmann::json Clan::to_json() const {
  nlohmann::json j;
  j["status"] = status == ClanStatus::Complete ? "complete" : "capped";
  auto rs = nlohmann::json::array();
  for (const auto& r : rects)
    rs.push_back({{"id", r.id},
                  {"xi", r.xi},
                  {"u", r.u},
                  {"birth", r.birth},
                  {"death", r.death},
                  {"gen", r.generation}});
  j["rects"] = std::move(rs);
  auto es = nlohmann::json::array();
  for (const auto& [c, a] : edges) es.push_back({c, a});
  j["edges"] = std::move(es);
  return j;
}

std::vector<Rect> sample_alive_at_zero(Interval strip, const ModelParams& params, Rng& rng,
                                       IdSource& ids) {
  std::vector<Rect> out;
  const double len = strip.right - strip.left;
  if (!(len > 0.0)) return out;
  const std::int64_t n = poisson(rng, params.lambda * len);
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    Rect r;
    r.id = ids.next();
    r.xi = uniform(rng, strip.left, strip.right);
    r.u = sample_length(params.pi, rng);
    r.birth = -exponential1(rng);
    r.death = 0.0;
    r.flag = uniform(rng, 0.0, 1.0);
    out.push_back(r);
  }
  return out;
}

std::vector<Rect> sample_deaths_in_region(const Region& region, const ModelParams& params,
                                          Rng& rng, IdSource& ids) {
  std::vector<Rect> out;
  for (const auto& box : region.boxes) {
    if (box.empty()) continue;
    const std::int64_t n = poisson(rng, params.lambda * box.area());
    for (std::int64_t i = 0; i < n; ++i) {
      Rect r;
      r.id = ids.next();
      r.xi = uniform(rng, box.x_lo, box.x_hi);
      r.death = uniform(rng, box.t_lo, box.t_hi);
      r.u = sample_length(params.pi, rng);
      r.birth = r.death - exponential1(rng);
      r.flag = uniform(rng, 0.0, 1.0);
      out.push_back(r);
    }
  }
  return out;
}

Region influence_region(const Rect& r, double H) {
  if (!(H > 0.0)) throw ModelError("support bound H must be > 0");
  Region out;
  out.boxes.push_back({r.xi - H, r.xi + r.u, std::min(r.birth, 0.0), 0.0});
  return out;
}

Clan build_clan(const Window& window, const ModelParams& params, Rng& rng,
                const ClanOptions& options) {
  if (options.cap < 1) throw ModelError("cap must be >= 1");
  const double H = support_sup(params.pi);

  IdSource ids;
  Skyline explored;
  IntervalSet explored_zero;
  LifeIndex index(H);
  std::vector<Rect> pool;
  std::vector<char> in_clan;
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  std::vector<std::int64_t> roots;

  auto admit = [&](std::vector<Rect>&& fresh) {
    for (auto& r : fresh) {
      const auto idx = static_cast<std::int32_t>(pool.size());
      index.insert(r, idx);
      pool.push_back(r);
      in_clan.push_back(0);
    }
  };

  // Generation 0: everything alive at time 0 whose basis meets the window.
  explored_zero.add(window.a - H, window.b);
  admit(sample_alive_at_zero({window.a - H, window.b}, params, rng, ids));
  std::vector<std::int32_t> frontier;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].xi < window.b && pool[i].right() > window.a) {
      in_clan[i] = 1;
      pool[i].generation = 0;
      roots.push_back(pool[i].id);
      frontier.push_back(static_cast<std::int32_t>(i));
    }
  }

  Clan clan;
  clan.status = ClanStatus::Complete;
  int generation = 0;
  while (!frontier.empty()) {
    if (static_cast<std::int64_t>(pool.size()) > options.cap) {
      clan.status = ClanStatus::Capped;
      break;
    }
    ++generation;

    Region fresh_area;
    std::vector<Interval> fresh_strips;
    double earliest_birth = std::numeric_limits<double>::infinity();
    for (std::int32_t idx : frontier) {
      const Rect& r = pool[idx];
      earliest_birth = std::min(earliest_birth, r.birth);
      auto carved = explored.carve(r.xi - H, r.right(), r.birth);
      fresh_area.boxes.insert(fresh_area.boxes.end(), carved.boxes.begin(), carved.boxes.end());
      auto strips = explored_zero.add(r.xi - H, r.right());
      fresh_strips.insert(fresh_strips.end(), strips.begin(), strips.end());
    }

    auto fresh = sample_deaths_in_region(fresh_area, params, rng, ids);
    for (const auto& strip : fresh_strips) {
      auto alive = sample_alive_at_zero(strip, params, rng, ids);
      fresh.insert(fresh.end(), alive.begin(), alive.end());
    }
    if (options.restrict_to_later_births) {
      std::erase_if(fresh, [&](const Rect& r) { return !(r.birth > earliest_birth); });
    }
    admit(std::move(fresh));

    // Every ancestor of a frontier member now lies in the pool.
    std::vector<std::int32_t> next;
    for (std::int32_t idx : frontier) {
      const Rect child = pool[idx];
      std::vector<std::int32_t> found;
      index.for_each_alive(child.xi - H, child.right(), child.birth, [&](std::int32_t a) {
        if (a == idx) return;
        const Rect& cand = pool[a];
        if (cand.birth <= child.birth && intersects(cand, child)) found.push_back(a);
      });
      std::sort(found.begin(), found.end());
      found.erase(std::unique(found.begin(), found.end()), found.end());
      for (std::int32_t a : found) {
        edges.emplace_back(child.id, pool[a].id);
        if (!in_clan[a]) {
          in_clan[a] = 1;
          pool[a].generation = generation;
          next.push_back(a);
        }
      }
    }
    frontier = std::move(next);
  }

  clan.iterations = generation;
  clan.sampled = static_cast<std::int64_t>(pool.size());
  clan.explored_region = explored.to_region();
  clan.explored_zero_interval = explored_zero.to_vector();

  if (clan.status == ClanStatus::Complete) {
    Clan closed = ancestor_closure(std::move(pool), std::move(edges), std::move(roots));
    clan.rects = std::move(closed.rects);
    clan.edges = std::move(closed.edges);
    clan.roots = std::move(closed.roots);
  } else {
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (in_clan[i]) clan.rects.push_back(pool[i]);
    clan.edges = std::move(edges);
    clan.roots = std::move(roots);
  }
  return clan;
}

Clan build_point_clan(double x, const ModelParams& params, Rng& rng, const ClanOptions& options) {
  return build_clan(Window::point(x), params, rng, options);
}

Clan ancestor_closure(std::vector<Rect> rects,
                      std::vector<std::pair<std::int64_t, std::int64_t>> edges,
                      std::vector<std::int64_t> roots) {
  std::unordered_map<std::int64_t, std::size_t> pos;
  pos.reserve(rects.size());
  for (std::size_t i = 0; i < rects.size(); ++i) pos.emplace(rects[i].id, i);

  std::vector<std::vector<std::size_t>> ancestors(rects.size());
  for (const auto& [c, a] : edges) {
    auto ci = pos.find(c);
    auto ai = pos.find(a);
    if (ci == pos.end() || ai == pos.end())
      throw ModelError("ancestor edge references an unknown cylinder");
    ancestors[ci->second].push_back(ai->second);
  }

  std::vector<int> depth(rects.size(), -1);
  std::deque<std::size_t> queue;
  for (std::int64_t id : roots) {
    auto it = pos.find(id);
    if (it == pos.end()) throw ModelError("root references an unknown cylinder");
    if (depth[it->second] < 0) {
      depth[it->second] = 0;
      queue.push_back(it->second);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t a : ancestors[i]) {
      if (depth[a] >= 0) continue;
      depth[a] = depth[i] + 1;
      queue.push_back(a);
    }
  }

  Clan out;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    if (depth[i] < 0) continue;
    rects[i].generation = depth[i];
    out.rects.push_back(rects[i]);
  }
  std::sort(out.rects.begin(), out.rects.end(),
            [](const Rect& l, const Rect& r) { return l.id < r.id; });
  for (const auto& e : edges)
    if (depth[pos.at(e.first)] >= 0) out.edges.push_back(e);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  out.roots = std::move(roots);
  return out;
}

}  // namespace lossnet
