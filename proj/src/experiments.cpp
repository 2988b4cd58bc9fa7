#include "lossnet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "lossnet/parallel.hpp"

namespace lossnet {

namespace {

struct Accumulator {
  double sum = 0.0;
  double sumsq = 0.0;
  std::int64_t n = 0;

  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  void merge(const Accumulator& o) {
    sum += o.sum;
    sumsq += o.sumsq;
    n += o.n;
  }
  [[nodiscard]] double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  [[nodiscard]] double se() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  }
};

constexpr int kMaxConditioningAttempts = 10'000'000;

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ClanSizeSample> sample_clan_sizes(const ModelParams& params, double x,
                                              std::int64_t reps, std::uint64_t seed,
                                              const RunOptions& opt) {
  if (reps < 1) throw ExperimentError("reps must be >= 1");
  std::vector<ClanSizeSample> out(static_cast<std::size_t>(reps));
  const ClanOptions clan_opt{opt.cap, opt.restrict_to_later_births};
  parallel_for(out.size(), opt.threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    ClanSizeSample s;
    for (;;) {
      ++s.attempts;
      Clan clan = build_point_clan(x, params, rng, clan_opt);
      if (clan.roots.empty()) {
        if (s.attempts >= kMaxConditioningAttempts)
          throw ExperimentError("generation 0 stayed empty; lambda * rho1 too small");
        continue;
      }
      s.capped = clan.status == ClanStatus::Capped;
      s.size = static_cast<std::int64_t>(clan.size());
      s.generations = clan.max_generation() + 1;
      break;
    }
    out[i] = s;
  });
  return out;
}

ClanSizeStats summarize(const std::vector<ClanSizeSample>& samples) {
  Accumulator n;
  double attempts = 0.0;
  ClanSizeStats st;
  st.reps = static_cast<std::int64_t>(samples.size());
  for (const auto& s : samples) {
    attempts += s.attempts;
    if (s.capped) {
      ++st.capped;
    } else {
      n.add(static_cast<double>(s.size));
    }
  }
  st.mean = n.mean();
  st.se = n.se();
  st.mean_attempts = samples.empty() ? 0.0 : attempts / static_cast<double>(samples.size());
  return st;
}

ClanSizeStats estimate_mean_clan_size(const ModelParams& params, double x, std::int64_t reps,
                                      std::uint64_t seed, const RunOptions& opt) {
  auto st = summarize(sample_clan_sizes(params, x, reps, seed, opt));
  if (st.capped == st.reps)
    throw ExperimentError("all " + std::to_string(st.reps) + " replications hit the cap of " +
                          std::to_string(opt.cap) + " at lambda=" +
                          std::to_string(params.lambda));
  return st;
}

// ---------------------------------------------------------------------------

std::vector<double> branching_offspring(const ModelParams& params, double u, Rng& rng) {
  std::vector<double> children;
  const double lambda = params.lambda;
  if (params.pi.is_discrete()) {
    for (const auto& a : params.pi.atoms()) {
      const auto n = poisson(rng, lambda * a.prob * (u + a.value));
      children.insert(children.end(), static_cast<std::size_t>(n), a.value);
    }
    return children;
  }
  // Continuous law: mixture of pi (weight u) and its length-biased version
  // (weight rho1) reproduces the density pi(v)(u + v) / (u + rho1).
  const double rho1 = moments(params.pi).rho1;
  const auto n = poisson(rng, lambda * (u + rho1));
  for (std::int64_t i = 0; i < n; ++i) {
    const bool biased = uniform(rng, 0.0, u + rho1) >= u;
    children.push_back(biased ? sample_size_biased_length(params.pi, rng)
                              : sample_length(params.pi, rng));
  }
  return children;
}

namespace {

/// Total progeny of the given first generation; -1 if the cap was exceeded.
std::int64_t branching_total(const ModelParams& params, std::deque<double> queue,
                             std::int64_t cap, Rng& rng) {
  std::int64_t total = static_cast<std::int64_t>(queue.size());
  while (!queue.empty()) {
    if (total > cap) return -1;
    const double u = queue.front();
    queue.pop_front();
    const auto children = branching_offspring(params, u, rng);
    total += static_cast<std::int64_t>(children.size());
    queue.insert(queue.end(), children.begin(), children.end());
  }
  return total;
}

BranchingStats reduce_totals(const std::vector<std::int64_t>& totals) {
  BranchingStats st;
  Accumulator acc;
  st.reps = static_cast<std::int64_t>(totals.size());
  for (auto t : totals) {
    if (t < 0) {
      ++st.capped;
    } else {
      acc.add(static_cast<double>(t));
    }
  }
  st.mean = acc.mean();
  st.se = acc.se();
  st.extinct_fraction =
      st.reps ? static_cast<double>(st.reps - st.capped) / static_cast<double>(st.reps) : 0.0;
  return st;
}

}  // namespace

BranchingStats simulate_branching_total(const ModelParams& params, double root_u,
                                        std::int64_t reps, std::uint64_t seed,
                                        const RunOptions& opt) {
  if (reps < 1) throw ExperimentError("reps must be >= 1");
  if (!(root_u > 0.0)) throw ExperimentError("root length must be > 0");
  std::vector<std::int64_t> totals(static_cast<std::size_t>(reps));
  parallel_for(totals.size(), opt.threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    totals[i] = branching_total(params, std::deque<double>{root_u}, opt.cap, rng);
  });
  return reduce_totals(totals);
}

BranchingStats simulate_branching_point_total(const ModelParams& params, std::int64_t reps,
                                              std::uint64_t seed, const RunOptions& opt) {
  if (reps < 1) throw ExperimentError("reps must be >= 1");
  const double rho1 = moments(params.pi).rho1;
  std::vector<std::int64_t> totals(static_cast<std::size_t>(reps));
  parallel_for(totals.size(), opt.threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    std::int64_t n = 0;
    for (int attempt = 0; n == 0; ++attempt) {
      if (attempt >= kMaxConditioningAttempts)
        throw ExperimentError("generation 0 stayed empty; lambda * rho1 too small");
      n = poisson(rng, params.lambda * rho1);
    }
    std::deque<double> roots;
    for (std::int64_t k = 0; k < n; ++k) roots.push_back(sample_size_biased_length(params.pi, rng));
    totals[i] = branching_total(params, std::move(roots), opt.cap, rng);
  });
  return reduce_totals(totals);
}

// ---------------------------------------------------------------------------

namespace {

struct Individual {
  double xi;
  double u;
  double birth;
  double death;
  Color color;
  std::int32_t parent;  // -1 for the root
  std::int32_t type;    // atom index
};

struct ColoredPartial {
  // [u][v] accumulators over green parents with a green parent.
  std::vector<Accumulator> black, green, total;
  std::int64_t black_parent_children = 0;
  std::int64_t green_children_of_black = 0;
  Accumulator gap;
  std::int64_t individuals = 0;
};

}  // namespace

ColoredStats simulate_colored_branching(const ModelParams& params, int generations,
                                        std::int64_t reps, std::uint64_t seed,
                                        const RunOptions& opt) {
  if (generations < 3) throw ExperimentError("colors need at least 3 generations");
  if (reps < 1) throw ExperimentError("reps must be >= 1");
  if (!params.pi.is_discrete())
    throw ExperimentError("colored branching statistics need a discrete length law");
  const auto atoms = params.pi.atoms();
  const std::size_t k = atoms.size();
  const double lambda = params.lambda;

  std::vector<ColoredPartial> partials(static_cast<std::size_t>(reps));
  parallel_for(partials.size(), opt.threads, [&](std::size_t rep) {
    Rng rng = make_stream(seed, rep);
    ColoredPartial part;
    part.black.resize(k * k);
    part.green.resize(k * k);
    part.total.resize(k * k);

    std::vector<Individual> pop;
    // Root: a generation-1 cylinder covering the observation point at time 0.
    {
      const double u = sample_length(params.pi, rng);
      std::int32_t type = 0;
      for (std::size_t j = 0; j < k; ++j)
        if (atoms[j].value == u) type = static_cast<std::int32_t>(j);
      pop.push_back({0.0, u, -exponential1(rng), 0.0, Color::Green, -1, type});
    }
    std::vector<std::int32_t> current{0};
    for (int gen = 2; gen <= generations && !current.empty(); ++gen) {
      std::vector<std::int32_t> next;
      for (std::int32_t pidx : current) {
        if (static_cast<std::int64_t>(pop.size()) > opt.cap) break;
        const Individual parent = pop[pidx];
        std::optional<Individual> grand;
        if (parent.parent >= 0) grand = pop[parent.parent];
        const bool gg = parent.color == Color::Green && grand && grand->color == Color::Green;
        for (std::size_t v = 0; v < k; ++v) {
          const double len = atoms[v].value;
          const auto n = poisson(rng, lambda * atoms[v].prob * (parent.u + len));
          std::int64_t black = 0;
          for (std::int64_t c = 0; c < n; ++c) {
            Individual child{uniform(rng, parent.xi - len, parent.xi + parent.u),
                             len,
                             parent.birth - exponential1(rng),
                             parent.birth + exponential1(rng),
                             Color::Green,
                             pidx,
                             static_cast<std::int32_t>(v)};
            if (parent.color == Color::Black) {
              child.color = Color::Black;
            } else if (grand && grand->color == Color::Green) {
              // Black iff the child also overlaps the grandparent and is still
              // alive at the grandparent's birth, i.e. it is already one of
              // the grandparent's own children.
              const double l_lo = std::max(parent.xi - len, grand->xi - len);
              const double l_hi = std::min(parent.xi + parent.u, grand->xi + grand->u);
              if (child.xi >= l_lo && child.xi <= l_hi && child.death >= grand->birth)
                child.color = Color::Black;
            }
            part.gap.add(std::exp(-(parent.birth - child.birth)));
            if (parent.color == Color::Black) {
              ++part.black_parent_children;
              if (child.color == Color::Green) ++part.green_children_of_black;
            }
            if (child.color == Color::Black) ++black;
            next.push_back(static_cast<std::int32_t>(pop.size()));
            pop.push_back(child);
          }
          if (gg) {
            const std::size_t cell = static_cast<std::size_t>(parent.type) * k + v;
            part.black[cell].add(static_cast<double>(black));
            part.green[cell].add(static_cast<double>(n - black));
            part.total[cell].add(static_cast<double>(n));
          }
        }
      }
      current = std::move(next);
    }
    part.individuals = static_cast<std::int64_t>(pop.size());
    partials[rep] = std::move(part);
  });

  ColoredPartial all;
  all.black.resize(k * k);
  all.green.resize(k * k);
  all.total.resize(k * k);
  for (const auto& p : partials) {
    for (std::size_t c = 0; c < k * k; ++c) {
      all.black[c].merge(p.black[c]);
      all.green[c].merge(p.green[c]);
      all.total[c].merge(p.total[c]);
    }
    all.black_parent_children += p.black_parent_children;
    all.green_children_of_black += p.green_children_of_black;
    all.gap.merge(p.gap);
    all.individuals += p.individuals;
  }

  ColoredStats st;
  for (std::size_t u = 0; u < k; ++u)
    for (std::size_t v = 0; v < k; ++v) {
      const std::size_t c = u * k + v;
      ColoredCell cell;
      cell.parent_u = atoms[u].value;
      cell.child_v = atoms[v].value;
      cell.gg_parents = all.total[c].n;
      cell.black_mean = all.black[c].mean();
      cell.black_se = all.black[c].se();
      cell.green_mean = all.green[c].mean();
      cell.green_se = all.green[c].se();
      cell.total_mean = all.total[c].mean();
      cell.total_se = all.total[c].se();
      const double pv = atoms[v].prob;
      cell.black_lower = 0.5 * lambda * pv * cell.child_v;
      cell.green_upper = lambda * pv * (cell.parent_u + 0.5 * cell.child_v);
      cell.total_exact = lambda * pv * (cell.parent_u + cell.child_v);
      st.cells.push_back(cell);
    }
  st.black_parent_children = all.black_parent_children;
  st.green_children_of_black = all.green_children_of_black;
  st.birth_gap_exp_mean = all.gap.mean();
  st.birth_gap_exp_se = all.gap.se();
  st.birth_gap_pairs = all.gap.n;
  st.individuals = all.individuals;
  return st;
}

// ---------------------------------------------------------------------------

std::vector<double> make_grid(double a, double b, double step) {
  if (!(step > 0.0) || !(a <= b) || !std::isfinite(a) || !std::isfinite(b))
    throw ExperimentError("grid needs a <= b and step > 0");
  const auto n = static_cast<std::int64_t>(std::floor((b - a) / step + 1e-9));
  std::vector<double> grid;
  for (std::int64_t i = 0; i <= n; ++i) grid.push_back(a + static_cast<double>(i) * step);
  return grid;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ':')) {
    try {
      std::size_t pos = 0;
      parts.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ExperimentError("malformed grid '" + spec + "', expected a:b:step");
    }
  }
  if (parts.size() != 3) throw ExperimentError("malformed grid '" + spec + "', expected a:b:step");
  return make_grid(parts[0], parts[1], parts[2]);
}

SweepTable lambda_grid_sweep(const LengthDistribution& pi, const std::vector<double>& grid,
                             std::int64_t reps, std::uint64_t seed, const RunOptions& opt) {
  if (grid.empty()) throw ExperimentError("empty lambda grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ExperimentError("lambda grid must be strictly increasing");
  SweepTable table;
  for (double lambda : grid) {
    const ModelParams params(lambda, 1, pi);
    // Same seed at every lambda: replication i shares its stream across the grid.
    const auto st = summarize(sample_clan_sizes(params, 0.0, reps, seed, opt));
    SweepRow row{lambda, st.reps, st.mean, st.se, st.capped};
    if (st.capped == st.reps) {
      row.mean_N = std::numeric_limits<double>::quiet_NaN();
      row.se_N = std::numeric_limits<double>::quiet_NaN();
    }
    table.rows.push_back(row);
  }
  return table;
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "lambda,reps,mean_N,se_N,capped\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : table.rows)
    out << r.lambda << ',' << r.reps << ',' << r.mean_N << ',' << r.se_N << ',' << r.capped
        << '\n';
}

SweepTable read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ExperimentError("empty sweep CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "lambda,reps,mean_N,se_N,capped")
    throw ExperimentError("unexpected sweep CSV header '" + line + "'");
  SweepTable table;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string f[5];
    for (auto& s : f)
      if (!std::getline(fields, s, ','))
        throw ExperimentError("short row at line " + std::to_string(lineno));
    try {
      table.rows.push_back({std::stod(f[0]), std::stoll(f[1]), std::stod(f[2]), std::stod(f[3]),
                            std::stoll(f[4])});
    } catch (const std::exception&) {
      throw ExperimentError("malformed row at line " + std::to_string(lineno));
    }
  }
  return table;
}

double PolyFit::operator()(double lambda) const {
  const double t = (lambda - center) / scale;
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
  return acc;
}

std::vector<double> PolyFit::monomial_coefficients() const {
  // sum_k c_k ((x - center) / scale)^k expanded with the binomial theorem.
  std::vector<double> out(coeffs.size(), 0.0);
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const double ck = coeffs[k] / std::pow(scale, static_cast<double>(k));
    double binom = 1.0;
    for (std::size_t j = 0; j <= k; ++j) {
      out[j] += ck * binom * std::pow(-center, static_cast<double>(k - j));
      binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
    }
  }
  return out;
}

PolyFit fit_polynomial(const std::vector<double>& x, const std::vector<double>& y, int degree) {
  if (x.size() != y.size()) throw ExperimentError("fit needs equally many x and y values");
  if (degree < 0) throw ExperimentError("degree must be >= 0");
  if (static_cast<std::size_t>(degree) >= x.size())
    throw ExperimentError("degree " + std::to_string(degree) + " needs more than " +
                          std::to_string(x.size()) + " points");
  PolyFit fit;
  fit.requested_degree = degree;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  fit.center = 0.5 * (*lo + *hi);
  fit.scale = *hi > *lo ? 0.5 * (*hi - *lo) : 1.0;

  const auto m = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) rhs(i) = y[static_cast<std::size_t>(i)];

  for (int deg = degree; deg >= 0; --deg) {
    Eigen::MatrixXd v(m, deg + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double t = (x[static_cast<std::size_t>(i)] - fit.center) / fit.scale;
      double p = 1.0;
      for (int j = 0; j <= deg; ++j, p *= t) v(i, j) = p;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                 : std::numeric_limits<double>::infinity();
    if (cond > kMaxFitCondition && deg > 0) {
      fit.warnings.push_back("degree " + std::to_string(deg) + " ill-conditioned (cond " +
                             std::to_string(cond) + "); reducing");
      continue;
    }
    Eigen::VectorXd c = v.colPivHouseholderQr().solve(rhs);
    fit.coeffs.assign(c.data(), c.data() + c.size());
    fit.residual_norm = (v * c - rhs).norm();
    fit.condition = cond;
    break;
  }
  return fit;
}

PolyFit fit_reciprocal_log(const SweepTable& table, int degree) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& r : table.rows) {
    if (!std::isfinite(r.mean_N)) continue;  // every replication capped
    if (!(r.mean_N > 1.0))
      throw ExperimentError("mean_N must exceed 1 for 1/log(mean_N); lambda=" +
                            std::to_string(r.lambda));
    x.push_back(r.lambda);
    y.push_back(1.0 / std::log(r.mean_N));
  }
  return fit_polynomial(x, y, degree);
}

CriticalEstimate estimate_lambda_c(const SweepTable& table, int degree) {
  CriticalEstimate est{0.0, fit_reciprocal_log(table, degree)};
  const auto& fit = est.fit;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::vector<double> lambdas;
  for (const auto& r : table.rows)
    if (std::isfinite(r.mean_N)) lambdas.push_back(r.lambda);
  for (double l : lambdas) {
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  if (lambdas.size() >= 2) hi += lambdas.back() - lambdas[lambdas.size() - 2];

  constexpr int kScan = 20'000;
  const double f_lo = fit(lo);
  if (f_lo == 0.0) {
    est.lambda_c = lo;
    return est;
  }
  double a = lo;
  for (int i = 1; i <= kScan; ++i) {
    const double b = lo + (hi - lo) * static_cast<double>(i) / kScan;
    const double fb = fit(b);
    if ((fb < 0.0) != (f_lo < 0.0) || fb == 0.0) {
      double left = a;
      double right = b;
      while (right - left > 1e-7) {
        const double mid = 0.5 * (left + right);
        if ((fit(mid) < 0.0) == (f_lo < 0.0) && fit(mid) != 0.0) {
          left = mid;
        } else {
          right = mid;
        }
      }
      est.lambda_c = 0.5 * (left + right);
      return est;
    }
    a = b;
  }
  throw ExperimentError("no divergence detected in grid");
}

nlohmann::json sweep_metadata(const LengthDistribution& pi, const std::vector<double>& grid,
                              std::int64_t reps, std::uint64_t seed, std::int64_t cap) {
  return {{"seed", seed},
          {"cap", cap},
          {"pi", pi.to_json()},
          {"grid", grid},
          {"reps", reps},
          {"point", 0.0},
          {"conditioning", "nonempty_gen0"},
          {"capped_runs", "excluded from mean_N and se_N, counted in capped"},
          {"generator", std::string(kGeneratorName)}};
}

}  // namespace lossnet
