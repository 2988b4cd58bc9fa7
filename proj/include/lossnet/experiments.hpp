#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "lossnet/backward.hpp"
#include "lossnet/model.hpp"

namespace lossnet {

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Clan-size statistics at a point, conditioned on a nonempty generation 0.

struct ClanSizeSample {
  std::int64_t size = 0;  // rectangles in the clan (valid when !capped)
  bool capped = false;
  int attempts = 0;       // draws needed to get a nonempty generation 0
  int generations = 0;
};

struct ClanSizeStats {
  double mean = 0.0;
  double se = 0.0;
  std::int64_t reps = 0;
  std::int64_t capped = 0;
  double mean_attempts = 0.0;
};

struct RunOptions {
  std::int64_t cap = kDefaultCap;
  int threads = 0;  // 0: LOSSNET_THREADS or hardware concurrency
  bool restrict_to_later_births = false;
};

/// One conditioned clan per replication; replication i uses stream (seed, i).
std::vector<ClanSizeSample> sample_clan_sizes(const ModelParams& params, double x,
                                              std::int64_t reps, std::uint64_t seed,
                                              const RunOptions& opt = {});
ClanSizeStats summarize(const std::vector<ClanSizeSample>& samples);
/// Mean/SE over non-capped replications; throws if every run was capped.
ClanSizeStats estimate_mean_clan_size(const ModelParams& params, double x, std::int64_t reps,
                                      std::uint64_t seed, const RunOptions& opt = {});

// ---------------------------------------------------------------------------
// Dominating multitype Galton-Watson process with offspring mean
// m(u, v) = lambda pi(v) (u + v).

struct BranchingStats {
  double mean = 0.0;  // over extinct (non-capped) runs
  double se = 0.0;
  double extinct_fraction = 0.0;
  std::int64_t reps = 0;
  std::int64_t capped = 0;
};

/// Child lengths of one individual of length u.
std::vector<double> branching_offspring(const ModelParams& params, double u, Rng& rng);

BranchingStats simulate_branching_total(const ModelParams& params, double root_u,
                                        std::int64_t reps, std::uint64_t seed,
                                        const RunOptions& opt = {});

/// Branching started from the same generation 0 as a point clan: a
/// Poisson(lambda rho1) number of length-biased roots, conditioned nonempty.
BranchingStats simulate_branching_point_total(const ModelParams& params, std::int64_t reps,
                                              std::uint64_t seed, const RunOptions& opt = {});

// ---------------------------------------------------------------------------
// Two-generation colored branching with explicit geometry.

struct ColoredCell {
  double parent_u = 0.0;
  double child_v = 0.0;
  /// Parents that are green with a green parent of their own.
  std::int64_t gg_parents = 0;
  double black_mean = 0.0, black_se = 0.0;
  double green_mean = 0.0, green_se = 0.0;
  double total_mean = 0.0, total_se = 0.0;
  /// Analytic reference values for this (u, v).
  double black_lower = 0.0;  // lambda pi(v) v / 2
  double green_upper = 0.0;  // lambda pi(v) (u + v/2)
  double total_exact = 0.0;  // lambda pi(v) (u + v)
};

struct ColoredStats {
  std::vector<ColoredCell> cells;
  std::int64_t black_parent_children = 0;
  std::int64_t green_children_of_black = 0;
  double birth_gap_exp_mean = 0.0;  // E exp(-(parent birth - child birth))
  double birth_gap_exp_se = 0.0;
  std::int64_t birth_gap_pairs = 0;
  std::int64_t individuals = 0;
};

ColoredStats simulate_colored_branching(const ModelParams& params, int generations,
                                        std::int64_t reps, std::uint64_t seed,
                                        const RunOptions& opt = {});

// ---------------------------------------------------------------------------
// Sweeps over lambda and the critical-point estimator.

struct SweepRow {
  double lambda = 0.0;
  std::int64_t reps = 0;
  double mean_N = 0.0;
  double se_N = 0.0;
  std::int64_t capped = 0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
};

/// Inclusive arithmetic grid a, a+step, ..., up to b (tolerant to rounding).
std::vector<double> make_grid(double a, double b, double step);
/// Parses "a:b:step".
std::vector<double> parse_grid(const std::string& spec);

SweepTable lambda_grid_sweep(const LengthDistribution& pi, const std::vector<double>& grid,
                             std::int64_t reps, std::uint64_t seed, const RunOptions& opt = {});

void write_sweep_csv(std::ostream& out, const SweepTable& table);
SweepTable read_sweep_csv(std::istream& in);

/// Least-squares polynomial in t = (lambda - center) / scale.
struct PolyFit {
  double center = 0.0;
  double scale = 1.0;
  std::vector<double> coeffs;  // in t, lowest order first
  double residual_norm = 0.0;
  double condition = 1.0;
  int requested_degree = 0;
  std::vector<std::string> warnings;

  [[nodiscard]] int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  [[nodiscard]] double operator()(double lambda) const;
  /// Coefficients in lambda itself, lowest order first.
  [[nodiscard]] std::vector<double> monomial_coefficients() const;
};

inline constexpr int kDefaultFitDegree = 9;
inline constexpr double kMaxFitCondition = 1e10;

PolyFit fit_polynomial(const std::vector<double>& x, const std::vector<double>& y, int degree);
/// Fits 1/log(mean_N) against lambda.
PolyFit fit_reciprocal_log(const SweepTable& table, int degree = kDefaultFitDegree);

struct CriticalEstimate {
  double lambda_c = 0.0;
  PolyFit fit;
};

/// Smallest root of the fitted 1/log(mean_N) in [min lambda, max lambda + one
/// grid step], to 1e-6.
CriticalEstimate estimate_lambda_c(const SweepTable& table, int degree = kDefaultFitDegree);

nlohmann::json sweep_metadata(const LengthDistribution& pi, const std::vector<double>& grid,
                              std::int64_t reps, std::uint64_t seed, std::int64_t cap);

}  // namespace lossnet
