#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "lossnet/backward.hpp"
#include "stats_oracles.hpp"

using namespace lossnet;
using fixture::rect;

namespace {

ModelParams uniform_params(double lambda) {
  return ModelParams(lambda, 1, LengthDistribution::uniform01());
}

/// Reference clan: realise the whole free process on a large box, then walk
/// the ancestor relation by brute force.
std::int64_t brute_force_point_clan_size(const ModelParams& p, Rng& rng, double half_width,
                                         double depth) {
  std::vector<Rect> all;
  const double H = support_sup(p.pi);
  const double x_lo = -half_width - H;
  const double x_hi = half_width;
  const auto n0 = poisson(rng, p.lambda * (x_hi - x_lo));
  for (std::int64_t i = 0; i < n0; ++i) {
    const double xi = uniform(rng, x_lo, x_hi);
    const double u = sample_length(p.pi, rng);
    all.push_back(rect(xi, u, -exponential1(rng), 0.0));
  }
  const auto n1 = poisson(rng, p.lambda * (x_hi - x_lo) * depth);
  for (std::int64_t i = 0; i < n1; ++i) {
    const double xi = uniform(rng, x_lo, x_hi);
    const double death = uniform(rng, -depth, 0.0);
    const double u = sample_length(p.pi, rng);
    all.push_back(rect(xi, u, death - exponential1(rng), death));
  }
  std::vector<char> seen(all.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].death == 0.0 && all[i].xi < 0.0 && all[i].right() > 0.0) {
      seen[i] = 1;
      queue.push_back(i);
    }
  std::int64_t n = 0;
  while (!queue.empty()) {
    const auto c = queue.front();
    queue.pop_front();
    ++n;
    for (std::size_t a = 0; a < all.size(); ++a)
      if (!seen[a] && all[a].birth <= all[c].birth && intersects(all[a], all[c])) {
        seen[a] = 1;
        queue.push_back(a);
      }
  }
  return n;
}

void check_clan_invariants(const Clan& clan, double H) {
  std::map<std::int64_t, const Rect*> by_id;
  for (const auto& r : clan.rects) by_id[r.id] = &r;
  for (auto id : clan.roots) {
    REQUIRE(by_id.count(id));
    CHECK(by_id[id]->generation == 0);
    CHECK(by_id[id]->death == 0.0);
  }
  std::map<std::int64_t, std::vector<std::int64_t>> ancestors;
  for (const auto& [c, a] : clan.edges) {
    REQUIRE(by_id.count(c));
    REQUIRE(by_id.count(a));
    CHECK(by_id[a]->birth <= by_id[c]->birth);
    CHECK(intersects(*by_id[a], *by_id[c]));
    ancestors[c].push_back(a);
  }
  // Generation equals BFS depth from the roots.
  std::map<std::int64_t, int> depth;
  std::deque<std::int64_t> queue;
  for (auto id : clan.roots) {
    depth[id] = 0;
    queue.push_back(id);
  }
  while (!queue.empty()) {
    auto c = queue.front();
    queue.pop_front();
    for (auto a : ancestors[c])
      if (!depth.count(a)) {
        depth[a] = depth[c] + 1;
        queue.push_back(a);
      }
  }
  CHECK(depth.size() == clan.rects.size());
  for (const auto& r : clan.rects) {
    REQUIRE(depth.count(r.id));
    CHECK(r.generation == depth[r.id]);
    CHECK(r.birth < r.death);
    CHECK(r.death <= 0.0);
  }
  // Every member's influence region has been explored.
  for (const auto& r : clan.rects) {
    auto inf = influence_region(r, H);
    CHECK(intersection_area(inf, clan.explored_region) ==
          doctest::Approx(inf.area()).epsilon(1e-9));
    const double lo = r.xi - H;
    const double hi = r.right();
    double covered = 0.0;
    for (const auto& iv : clan.explored_zero_interval)
      covered += std::max(0.0, std::min(hi, iv.right) - std::max(lo, iv.left));
    CHECK(covered == doctest::Approx(hi - lo).epsilon(1e-12));
  }
}

}  // namespace

TEST_SUITE("backward") {

TEST_CASE("alive-at-zero sampling on a strip") {
  auto p = uniform_params(0.5);
  std::vector<double> counts;
  std::vector<double> kept;
  std::vector<double> xs;
  const double a = 0.0;
  const double b = 10.0;
  for (int rep = 0; rep < 10000; ++rep) {
    auto rng = make_stream(20, rep);
    IdSource ids;
    auto rs = sample_alive_at_zero({a - 1.0, b}, p, rng, ids);
    counts.push_back(static_cast<double>(rs.size()));
    int k = 0;
    for (const auto& r : rs) {
      CHECK(r.death == 0.0);
      CHECK(r.birth < 0.0);
      if (r.xi < b && r.right() > a) ++k;
      if (rep < 1000) xs.push_back(r.xi);
    }
    kept.push_back(k);
  }
  auto c = oracle::mean_se(counts);
  CHECK(std::abs(c.mean - 0.5 * 11.0) < 3.0 * c.se);
  auto k = oracle::mean_se(kept);
  CHECK(std::abs(k.mean - 0.5 * 10.5) < 3.0 * k.se);
  CHECK(oracle::ks_one_sample_pvalue(xs, [](double x) { return (x + 1.0) / 11.0; }) > 0.01);
}

TEST_CASE("alive-at-zero sampling at small rate is mostly empty") {
  auto p = uniform_params(0.01);
  int empty = 0;
  const int n = 10000;
  for (int rep = 0; rep < n; ++rep) {
    auto rng = make_stream(21, rep);
    IdSource ids;
    empty += sample_alive_at_zero({0.0, 2.0}, p, rng, ids).empty();
  }
  const double q = std::exp(-0.02);
  CHECK(std::abs(empty / double(n) - q) < 3.0 * oracle::proportion_se(q, n));
  auto rng = make_stream(21, 0);
  IdSource ids;
  CHECK(sample_alive_at_zero({1.0, 1.0}, p, rng, ids).empty());
}

TEST_CASE("death sampling in a region") {
  auto p = uniform_params(0.7);
  {
    auto rng = make_stream(22, 0);
    IdSource ids;
    CHECK(sample_deaths_in_region(Region{}, p, rng, ids).empty());
  }
  Region region{{{0, 2, -1, 0}, {2, 3, -3, -1}}};  // area 2 + 2
  std::vector<double> counts;
  std::vector<double> x_first;
  std::vector<double> t_first;
  for (int rep = 0; rep < 10000; ++rep) {
    auto rng = make_stream(22, rep);
    IdSource ids;
    auto rs = sample_deaths_in_region(region, p, rng, ids);
    counts.push_back(static_cast<double>(rs.size()));
    for (const auto& r : rs) {
      CHECK(r.birth < r.death);
      if (r.xi < 2.0) {
        CHECK(r.death >= -1.0);
        x_first.push_back(r.xi);
        t_first.push_back(r.death);
      } else {
        CHECK(r.death <= -1.0);
      }
    }
  }
  auto c = oracle::mean_se(counts);
  CHECK(std::abs(c.mean - 0.7 * 4.0) < 3.0 * c.se);
  x_first.resize(std::min<std::size_t>(x_first.size(), 10000));
  t_first.resize(std::min<std::size_t>(t_first.size(), 10000));
  CHECK(oracle::ks_one_sample_pvalue(x_first, [](double x) { return x / 2.0; }) > 0.01);
  CHECK(oracle::ks_one_sample_pvalue(t_first, [](double t) { return t + 1.0; }) > 0.01);
}

TEST_CASE("influence region") {
  auto r = rect(0, 1, -2, 0);
  auto reg = influence_region(r, 1.0);
  REQUIRE(reg.boxes.size() == 1);
  CHECK(reg.boxes[0].x_lo == -1.0);
  CHECK(reg.boxes[0].x_hi == 1.0);
  CHECK(reg.boxes[0].t_lo == -2.0);
  CHECK(reg.boxes[0].t_hi == 0.0);
  CHECK(reg.area() == 4.0);

  auto flat = influence_region(rect(0, 1, 0, 0.5), 1.0);
  CHECK(flat.area() == 0.0);
  CHECK_THROWS_AS(influence_region(r, 0.0), ModelError);
}

TEST_CASE("ancestor closure") {
  std::vector<Rect> rs{rect(0, 1, -1, 0, 1), rect(0.5, 1, -2, -0.5, 2), rect(1, 1, -3, -1.5, 3),
                       rect(10, 1, -3, -1, 4)};
  auto roots_only = ancestor_closure(rs, {}, {1});
  REQUIRE(roots_only.rects.size() == 1);
  CHECK(roots_only.rects[0].id == 1);

  auto chain = ancestor_closure(rs, {{1, 2}, {2, 3}}, {1});
  REQUIRE(chain.rects.size() == 3);
  CHECK(chain.rects[0].generation == 0);
  CHECK(chain.rects[1].generation == 1);
  CHECK(chain.rects[2].generation == 2);
  CHECK(chain.edges.size() == 2);

  // A shortcut edge shortens the generation.
  auto shortcut = ancestor_closure(rs, {{1, 2}, {2, 3}, {1, 3}}, {1});
  CHECK(shortcut.rects[2].generation == 1);
  CHECK(std::none_of(chain.rects.begin(), chain.rects.end(),
                     [](const Rect& r) { return r.id == 4; }));
  CHECK_THROWS_AS(ancestor_closure(rs, {{1, 7}}, {1}), ModelError);
}

TEST_CASE("empty generation zero gives an empty complete clan") {
  auto p = uniform_params(0.5);
  int seen = 0;
  for (int rep = 0; rep < 200 && seen < 5; ++rep) {
    auto rng = make_stream(23, rep);
    auto clan = build_point_clan(0.0, p, rng);
    if (clan.roots.empty()) {
      ++seen;
      CHECK(clan.status == ClanStatus::Complete);
      CHECK(clan.size() == 0);
      CHECK(clan.edges.empty());
    }
  }
  CHECK(seen > 0);
}

TEST_CASE("point clan generation zero is Poisson with mean lambda rho1") {
  for (double lambda : {0.3, 1.0}) {
    auto p = uniform_params(lambda);
    std::vector<std::int64_t> roots;
    std::vector<double> rootsd;
    int empty = 0;
    const int n = 10000;
    for (int rep = 0; rep < n; ++rep) {
      auto rng = make_stream(24, rep);
      auto clan = build_point_clan(0.0, p, rng);
      roots.push_back(static_cast<std::int64_t>(clan.roots.size()));
      rootsd.push_back(static_cast<double>(clan.roots.size()));
      empty += clan.size() == 0;
      CHECK(clan.status == ClanStatus::Complete);
    }
    auto s = oracle::mean_se(rootsd);
    CHECK(std::abs(s.mean - lambda * 0.5) < 3.0 * s.se);
    CHECK(oracle::poisson_gof_pvalue(roots, lambda * 0.5) > 0.01);
    const double q = std::exp(-lambda * 0.5);
    CHECK(std::abs(empty / double(n) - q) < 3.0 * oracle::proportion_se(q, n));
  }
}

TEST_CASE("window clan generation zero has mean lambda (b - a + rho1)") {
  auto p = uniform_params(0.5);
  std::vector<std::int64_t> roots;
  std::vector<double> rootsd;
  for (int rep = 0; rep < 10000; ++rep) {
    auto rng = make_stream(25, rep);
    auto clan = build_clan(Window(0.0, 10.0), p, rng);
    roots.push_back(static_cast<std::int64_t>(clan.roots.size()));
    rootsd.push_back(static_cast<double>(clan.roots.size()));
  }
  auto s = oracle::mean_se(rootsd);
  CHECK(std::abs(s.mean - 5.25) < 3.0 * s.se);
  CHECK(oracle::poisson_gof_pvalue(roots, 5.25) > 0.01);
}

TEST_CASE("clan structure invariants") {
  for (auto pi : {LengthDistribution::uniform01(), LengthDistribution::point_mass(0.5),
                  LengthDistribution::discrete({{0.3, 0.5}, {1.2, 0.5}})}) {
    ModelParams p(0.8, 1, pi);
    for (int rep = 0; rep < 300; ++rep) {
      auto rng = make_stream(26, rep);
      auto clan = build_clan(Window(0.0, 2.0), p, rng);
      REQUIRE(clan.status == ClanStatus::Complete);
      check_clan_invariants(clan, support_sup(pi));
      CHECK(clan.max_generation() <= clan.iterations);
    }
  }
}

TEST_CASE("same seed gives an identical clan") {
  auto p = uniform_params(0.9);
  for (int rep = 0; rep < 20; ++rep) {
    auto r1 = make_stream(27, rep);
    auto r2 = make_stream(27, rep);
    auto a = build_clan(Window(0.0, 3.0), p, r1);
    auto b = build_clan(Window(0.0, 3.0), p, r2);
    CHECK(a.to_json().dump() == b.to_json().dump());
  }
}

TEST_CASE("lazy construction matches a brute-force clan in distribution") {
  auto p = uniform_params(0.6);
  std::vector<double> lazy;
  std::vector<double> brute;
  for (int rep = 0; rep < 3000; ++rep) {
    auto rng = make_stream(28, rep);
    lazy.push_back(static_cast<double>(build_point_clan(0.0, p, rng).size()));
    auto rng2 = make_stream(29, rep);
    brute.push_back(static_cast<double>(brute_force_point_clan_size(p, rng2, 12.0, 12.0)));
  }
  auto l = oracle::mean_se(lazy);
  auto b = oracle::mean_se(brute);
  CHECK(std::abs(l.mean - b.mean) < 3.0 * std::hypot(l.se, b.se));
  CHECK(oracle::ks_two_sample_pvalue(lazy, brute) > 0.01);
}

TEST_CASE("subcritical clans terminate") {
  auto p = uniform_params(0.3);
  int capped = 0;
  const int n = 10000;
  for (int rep = 0; rep < n; ++rep) {
    auto rng = make_stream(30, rep);
    capped += build_point_clan(0.0, p, rng).status == ClanStatus::Capped;
  }
  CHECK(capped < 0.001 * n);
}

TEST_CASE("mean clan size grows with the rate") {
  double prev = 0.0;
  for (double lambda : {0.3, 0.5, 0.7}) {
    auto p = uniform_params(lambda);
    std::vector<double> sizes;
    for (int rep = 0; rep < 10000; ++rep) {
      auto rng = make_stream(31, rep);
      sizes.push_back(static_cast<double>(build_point_clan(0.0, p, rng).size()));
    }
    auto s = oracle::mean_se(sizes);
    CHECK(s.mean > prev);
    prev = s.mean;
  }
}

TEST_CASE("cap stops the construction") {
  ModelParams p(3.5, 1, LengthDistribution::point_mass(0.5));
  int capped = 0;
  for (int rep = 0; rep < 20; ++rep) {
    auto rng = make_stream(32, rep);
    auto clan = build_point_clan(0.0, p, rng, {.cap = 200});
    if (clan.status == ClanStatus::Capped) {
      ++capped;
      CHECK(clan.sampled > 200);
    }
  }
  CHECK(capped > 0);
  auto rng = make_stream(32, 0);
  CHECK_THROWS_AS(build_point_clan(0.0, p, rng, {.cap = 0}), ModelError);
}

TEST_CASE("restricting to later births changes the clan-size law") {
  // The restriction drops candidates born before the previous frontier's
  // earliest birth; some of those are genuine ancestors, so clans shrink.
  auto p = uniform_params(0.8);
  std::vector<double> full;
  std::vector<double> restricted;
  std::int64_t lost = 0;
  for (int rep = 0; rep < 4000; ++rep) {
    auto r1 = make_stream(33, rep);
    auto r2 = make_stream(33, rep);
    auto a = build_point_clan(0.0, p, r1);
    auto b = build_point_clan(0.0, p, r2, {.restrict_to_later_births = true});
    full.push_back(static_cast<double>(a.size()));
    restricted.push_back(static_cast<double>(b.size()));
    lost += b.size() < a.size();
    if (rep < 300) check_clan_invariants(b, 1.0);
  }
  auto f = oracle::mean_se(full);
  auto r = oracle::mean_se(restricted);
  MESSAGE("mean clan size full=" << f.mean << " restricted=" << r.mean
          << " KS p=" << oracle::ks_two_sample_pvalue(full, restricted));
  CHECK(lost > 0);
  CHECK(r.mean <= f.mean);
}

}  // TEST_SUITE
