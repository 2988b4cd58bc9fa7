#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "lossnet/experiments.hpp"
#include "stats_oracles.hpp"

using namespace lossnet;

namespace {

SweepTable synthetic_table(const std::vector<double>& lambdas, double lambda_c) {
  // 1/log N = (lambda_c - lambda) / 4 exactly.
  SweepTable t;
  for (double l : lambdas) t.rows.push_back({l, 100, std::exp(4.0 / (lambda_c - l)), 0.1, 0});
  return t;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("clan size at tiny lambda is about one") {
  ModelParams p(0.05, 1, LengthDistribution::uniform01());
  auto st = estimate_mean_clan_size(p, 0.0, 10000, 1);
  CHECK(st.capped == 0);
  CHECK(st.mean >= 1.0);
  CHECK(st.mean <= 1.2);
}

TEST_CASE("conditioning attempts are geometric") {
  ModelParams p(0.4, 1, LengthDistribution::uniform01());
  auto samples = sample_clan_sizes(p, 0.0, 10000, 2);
  std::vector<double> attempts;
  for (const auto& s : samples) attempts.push_back(s.attempts);
  const auto ms = oracle::mean_se(attempts);
  const double success = 1.0 - std::exp(-0.4 * 0.5);
  CHECK(std::abs(ms.mean - 1.0 / success) < 3.0 * ms.se);
}

TEST_CASE("clan sizes are dominated by the branching process") {
  for (double lambda : {0.3, 0.6}) {
    ModelParams p(lambda, 1, LengthDistribution::uniform01());
    auto clan = estimate_mean_clan_size(p, 0.0, 4000, 3);
    auto br = simulate_branching_point_total(p, 4000, 4);
    CHECK(br.capped == 0);
    CHECK(clan.mean <= br.mean + 3.0 * br.se);
  }
}

TEST_CASE("branching total from one root matches the geometric series") {
  // Point mass: every individual has Poisson(2 lambda d) children, so the mean
  // total is 1 / (1 - 2 lambda d).
  ModelParams p(0.5, 1, LengthDistribution::point_mass(0.5));
  auto st = simulate_branching_total(p, 0.5, 10000, 5);
  CHECK(st.capped == 0);
  CHECK(st.extinct_fraction == 1.0);
  CHECK(std::abs(st.mean - 2.0) < 3.0 * st.se);
  CHECK_THROWS_AS(simulate_branching_total(p, 0.0, 10, 5), ExperimentError);
}

TEST_CASE("supercritical branching hits the cap more often") {
  ModelParams lo(0.8, 1, LengthDistribution::point_mass(1.0));
  ModelParams hi(1.2, 1, LengthDistribution::point_mass(1.0));
  RunOptions opt;
  opt.cap = 2000;
  auto a = simulate_branching_total(lo, 1.0, 2000, 6, opt);
  auto b = simulate_branching_total(hi, 1.0, 2000, 6, opt);
  CHECK(b.capped > a.capped);
  CHECK(b.extinct_fraction < 1.0);
}

TEST_CASE("offspring counts are Poisson") {
  const double d = 0.5;
  const double lambda = 0.7;
  ModelParams p(lambda, 1, LengthDistribution::point_mass(d));
  auto rng = make_stream(7, 0);
  std::vector<std::int64_t> counts;
  for (int i = 0; i < 20000; ++i) {
    auto kids = branching_offspring(p, d, rng);
    for (double v : kids) CHECK(v == d);
    counts.push_back(static_cast<std::int64_t>(kids.size()));
  }
  CHECK(oracle::poisson_gof_pvalue(counts, 2.0 * lambda * d) > 1e-3);

  // Continuous law: mean count lambda (u + rho1), child mean from the mixture.
  ModelParams q(0.9, 1, LengthDistribution::uniform01());
  const double u = 0.3;
  std::vector<double> n;
  std::vector<double> lengths;
  for (int i = 0; i < 20000; ++i) {
    auto kids = branching_offspring(q, u, rng);
    n.push_back(static_cast<double>(kids.size()));
    lengths.insert(lengths.end(), kids.begin(), kids.end());
  }
  const auto mn = oracle::mean_se(n);
  CHECK(std::abs(mn.mean - 0.9 * (u + 0.5)) < 3.0 * mn.se);
  // Density (u + v) / (u + 1/2) on [0, 1] has mean (u/2 + 1/3) / (u + 1/2).
  const auto ml = oracle::mean_se(lengths);
  CHECK(std::abs(ml.mean - (u / 2.0 + 1.0 / 3.0) / (u + 0.5)) < 3.0 * ml.se);
}

TEST_CASE("colored branching statistics") {
  ModelParams p(0.5, 1, LengthDistribution::discrete({{0.5, 0.5}, {1.0, 0.5}}));
  auto st = simulate_colored_branching(p, 6, 20000, 8);
  CHECK(st.black_parent_children > 0);
  CHECK(st.green_children_of_black == 0);
  REQUIRE(st.cells.size() == 4);
  for (const auto& c : st.cells) {
    REQUIRE(c.gg_parents > 100);
    CHECK(c.black_mean >= c.black_lower - 3.0 * c.black_se);
    CHECK(c.green_mean <= c.green_upper + 3.0 * c.green_se);
    CHECK(std::abs(c.total_mean - c.total_exact) < 3.0 * c.total_se);
    CHECK(c.black_mean + c.green_mean == doctest::Approx(c.total_mean).epsilon(1e-12));
  }
  CHECK(std::abs(st.birth_gap_exp_mean - 0.5) < 3.0 * st.birth_gap_exp_se);

  CHECK_THROWS_AS(simulate_colored_branching(p, 2, 10, 8), ExperimentError);
  ModelParams cont(0.5, 1, LengthDistribution::uniform01());
  CHECK_THROWS_AS(simulate_colored_branching(cont, 4, 10, 8), ExperimentError);
}

TEST_CASE("grids") {
  auto g = make_grid(0.5, 2.5, 0.1);
  CHECK(g.size() == 21);
  CHECK(g.back() == doctest::Approx(2.5));
  CHECK(parse_grid("0.1:0.3:0.1").size() == 3);
  CHECK_THROWS_AS(parse_grid("0.1:0.3"), ExperimentError);
  CHECK_THROWS_AS(parse_grid("a:1:0.1"), ExperimentError);
  CHECK_THROWS_AS(parse_grid("1:0:0.1"), ExperimentError);
  CHECK_THROWS_AS(parse_grid("0:1:0"), ExperimentError);
}

TEST_CASE("sweeps are deterministic and round-trip through CSV") {
  auto pi = LengthDistribution::point_mass(0.5);
  const std::vector<double> grid{0.5, 1.0, 1.5, 2.0, 2.5};
  RunOptions one;
  one.threads = 1;
  RunOptions two;
  two.threads = 2;
  auto a = lambda_grid_sweep(pi, grid, 600, 9, one);
  auto b = lambda_grid_sweep(pi, grid, 600, 9, two);
  std::ostringstream sa;
  std::ostringstream sb;
  write_sweep_csv(sa, a);
  write_sweep_csv(sb, b);
  CHECK(sa.str() == sb.str());
  REQUIRE(a.rows.size() == grid.size());

  std::istringstream in(sa.str());
  auto back = read_sweep_csv(in);
  REQUIRE(back.rows.size() == a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(back.rows[i].lambda == a.rows[i].lambda);
    CHECK(back.rows[i].mean_N == a.rows[i].mean_N);
    CHECK(back.rows[i].se_N == a.rows[i].se_N);
    CHECK(back.rows[i].reps == a.rows[i].reps);
    CHECK(back.rows[i].capped == a.rows[i].capped);
  }
  for (std::size_t i = 1; i < a.rows.size(); ++i) CHECK(a.rows[i].mean_N > a.rows[i - 1].mean_N);
  // Below the branching bound nothing comes near the cap.
  for (const auto& r : a.rows)
    if (r.lambda <= 4.0 / 3.0) CHECK(r.capped == 0);

  std::istringstream bad("lambda,reps\n1,2\n");
  CHECK_THROWS_AS(read_sweep_csv(bad), ExperimentError);
  CHECK_THROWS_AS(lambda_grid_sweep(pi, {1.0, 0.5}, 10, 9), ExperimentError);
}

TEST_CASE("polynomial fits") {
  std::vector<double> x;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(0.3 * i);
    y.push_back(2.0 - 0.3 * i);
  }
  auto line = fit_polynomial(x, y, 1);
  auto mono = line.monomial_coefficients();
  REQUIRE(mono.size() == 2);
  CHECK(std::abs(mono[0] - 2.0) < 1e-10);
  CHECK(std::abs(mono[1] + 1.0) < 1e-10);
  CHECK(line.residual_norm < 1e-10);
  CHECK(line(1.7) == doctest::Approx(0.3));

  auto flat = fit_polynomial(x, std::vector<double>(x.size(), 3.0), 0);
  CHECK(flat.degree() == 0);
  CHECK(flat(5.0) == doctest::Approx(3.0));

  std::vector<double> cubic;
  for (double v : x) cubic.push_back(1.0 - 2.0 * v + 0.5 * v * v * v);
  auto c = fit_polynomial(x, cubic, 3);
  auto cm = c.monomial_coefficients();
  REQUIRE(cm.size() == 4);
  CHECK(std::abs(cm[0] - 1.0) < 1e-9);
  CHECK(std::abs(cm[1] + 2.0) < 1e-9);
  CHECK(std::abs(cm[2]) < 1e-9);
  CHECK(std::abs(cm[3] - 0.5) < 1e-9);

  CHECK_THROWS_AS(fit_polynomial(x, y, 10), ExperimentError);
  CHECK_THROWS_AS(fit_polynomial(x, {1.0}, 1), ExperimentError);
}

TEST_CASE("critical estimate on synthetic data") {
  auto t = synthetic_table(make_grid(0.5, 2.5, 0.1), 2.55);
  auto est = estimate_lambda_c(t, 1);
  CHECK(est.lambda_c == doctest::Approx(2.55).epsilon(1e-6));
  auto est9 = estimate_lambda_c(t, 9);
  CHECK(est9.lambda_c == doctest::Approx(2.55).epsilon(1e-5));

  // Root far beyond one grid step past the data: no divergence.
  auto far = synthetic_table(make_grid(0.5, 1.5, 0.1), 5.0);
  CHECK_THROWS_AS(estimate_lambda_c(far, 1), ExperimentError);

  SweepTable below_one;
  below_one.rows.push_back({0.1, 10, 1.0, 0.0, 0});
  below_one.rows.push_back({0.2, 10, 1.5, 0.0, 0});
  CHECK_THROWS_AS(fit_reciprocal_log(below_one, 1), ExperimentError);
}

TEST_CASE("sweep metadata") {
  auto j = sweep_metadata(LengthDistribution::uniform01(), {0.5, 0.6}, 100, 42, 1000);
  CHECK(j.at("seed").get<std::uint64_t>() == 42);
  CHECK(j.at("reps").get<std::int64_t>() == 100);
  CHECK(j.at("grid").size() == 2);
}

}  // TEST_SUITE
