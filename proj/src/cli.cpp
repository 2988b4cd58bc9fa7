#include "lossnet/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lossnet/backward.hpp"
#include "lossnet/bounds.hpp"
#include "lossnet/experiments.hpp"
#include "lossnet/forward.hpp"
#include "lossnet/model.hpp"

namespace lossnet::cli {

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

/// Fills `target` from config[key] unless the flag was given explicitly.
template <class T>
void from_config(const json& config, const char* key, const CLI::Option* opt, T& target) {
  if (opt->count() > 0 || !config.contains(key)) return;
  try {
    target = config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

/// Model flags shared by several subcommands.
struct ModelFlags {
  double lambda = 0.0;
  int capacity = 1;
  std::string pi = "uniform01";
  json pi_json;  // set when the config carries a structured law
  std::uint64_t seed = 0;
  std::int64_t cap = kDefaultCap;

  CLI::Option* lambda_opt = nullptr;
  CLI::Option* capacity_opt = nullptr;
  CLI::Option* pi_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* cap_opt = nullptr;

  void add_to(CLI::App* app, bool with_lambda, bool with_capacity) {
    if (with_lambda) lambda_opt = app->add_option("--lambda", lambda, "arrival rate > 0");
    if (with_capacity)
      capacity_opt = app->add_option("--capacity", capacity, "cable capacity C >= 1");
    pi_opt = app->add_option(
        "--pi", pi, "length law: uniform01 | pointmass:d | beta:a:b | discrete:v1:p1,v2:p2,...");
    seed_opt = app->add_option("--seed", seed, "64-bit seed");
    cap_opt = app->add_option("--cap", cap, "max sampled cylinders per clan");
  }

  void apply_config(const json& c) {
    if (lambda_opt) from_config(c, "lambda", lambda_opt, lambda);
    if (capacity_opt) from_config(c, "capacity", capacity_opt, capacity);
    if (pi_opt->count() == 0 && c.contains("pi")) pi_json = c.at("pi");
    from_config(c, "seed", seed_opt, seed);
    from_config(c, "cap", cap_opt, cap);
  }

  [[nodiscard]] LengthDistribution law() const {
    if (!pi_json.is_null()) return LengthDistribution::from_json(pi_json);
    return LengthDistribution::parse(pi);
  }

  [[nodiscard]] ModelParams params() const {
    if (lambda_opt && lambda_opt->count() == 0 && !(lambda > 0.0))
      throw UsageError("--lambda is required");
    return {lambda, capacity, law()};
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perfect sampling and subcriticality bounds for a 1-D continuous loss network",
               "lossnet"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: LOSSNET_THREADS or all cores)");

  // sample ------------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "perfect sample of the stationary loss network");
  ModelFlags sample_flags;
  sample_flags.add_to(sample, true, true);
  std::vector<double> sample_window;
  auto* sample_window_opt =
      sample->add_option("--window", sample_window, "window endpoints A B")->expected(2);
  std::string sample_json;
  sample->add_option("--json", sample_json, "write the sample JSON here (default stdout)");
  std::string sample_config;
  sample->add_option("--config", sample_config, "JSON file with any of the flags above");
  bool sample_restrict = false;
  sample->add_flag("--restrict-births", sample_restrict,
                   "drop candidates born before the previous frontier (changes the law)");

  // clan --------------------------------------------------------------------
  auto* clan_cmd = app.add_subcommand("clan", "clan-of-ancestors statistics");
  ModelFlags clan_flags;
  clan_flags.add_to(clan_cmd, true, false);
  double clan_point = 0.0;
  auto* clan_point_opt = clan_cmd->add_option("--point", clan_point, "observation point X");
  std::vector<double> clan_window;
  auto* clan_window_opt =
      clan_cmd->add_option("--window", clan_window, "window endpoints A B")->expected(2);
  clan_point_opt->excludes(clan_window_opt);
  std::string clan_dump;
  clan_cmd->add_option("--dump", clan_dump, "write the full clan JSON here");
  std::string clan_config;
  clan_cmd->add_option("--config", clan_config, "JSON file with any of the flags above");

  // bounds ------------------------------------------------------------------
  auto* bounds_cmd = app.add_subcommand("bounds", "critical-rate bounds for a length law");
  std::string bounds_pi = "uniform01";
  bounds_cmd->add_option("--pi", bounds_pi, "length law")->required();

  // sweep -------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "mean clan size over a lambda grid");
  ModelFlags sweep_flags;
  sweep_flags.add_to(sweep, false, false);
  std::string sweep_grid;
  auto* sweep_grid_opt = sweep->add_option("--grid", sweep_grid, "lambda grid a:b:step");
  std::int64_t sweep_reps = 1000;
  auto* sweep_reps_opt = sweep->add_option("--reps", sweep_reps, "replications per lambda");
  std::string sweep_csv;
  auto* sweep_csv_opt = sweep->add_option("--csv", sweep_csv, "output CSV path");
  std::string sweep_config;
  sweep->add_option("--config", sweep_config, "JSON file (e.g. a previous sidecar)");

  // estimate-critical -------------------------------------------------------
  auto* estimate = app.add_subcommand("estimate-critical", "root of the fitted 1/log(mean N)");
  std::string estimate_csv;
  estimate->add_option("--csv", estimate_csv, "sweep CSV")->required();
  int estimate_degree = kDefaultFitDegree;
  estimate->add_option("--degree", estimate_degree, "polynomial degree");

  // branching ---------------------------------------------------------------
  auto* branching = app.add_subcommand("branching", "dominating branching process statistics");
  ModelFlags branching_flags;
  branching_flags.add_to(branching, true, false);
  bool colored = false;
  branching->add_flag("--colored", colored, "two-generation colored process");
  std::int64_t branching_reps = 10'000;
  branching->add_option("--reps", branching_reps, "replications");
  std::optional<double> root_length;
  branching->add_option("--root-length", root_length,
                        "single root of this length (default: point-clan generation 0)");
  int generations = 6;
  branching->add_option("--generations", generations, "generations for --colored (>= 3)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  RunOptions run_opt;
  run_opt.threads = threads;

  try {
    if (*sample) {
      if (!sample_config.empty()) {
        const json c = load_json_file(sample_config);
        sample_flags.apply_config(c);
        from_config(c, "window", sample_window_opt, sample_window);
      }
      if (sample_window.size() != 2) throw UsageError("--window A B is required");
      const auto params = sample_flags.params();
      const Window window(sample_window[0], sample_window[1]);
      ClanOptions opt{sample_flags.cap, sample_restrict};
      try {
        const auto s = perfect_sample(window, params, sample_flags.seed, opt);
        const std::string text = sample_to_json(s, params, sample_flags.seed).dump(2) + "\n";
        if (sample_json.empty()) {
          out << text;
        } else {
          write_text(sample_json, text);
        }
      } catch (const CappedError& e) {
        err << "capped: " << e.what() << "\n";
        return kExitCapped;
      }
      return kExitOk;
    }

    if (*clan_cmd) {
      if (!clan_config.empty()) {
        const json c = load_json_file(clan_config);
        clan_flags.apply_config(c);
        from_config(c, "point", clan_point_opt, clan_point);
        from_config(c, "window", clan_window_opt, clan_window);
      }
      const auto params = clan_flags.params();
      std::optional<Window> window;
      if (clan_window.size() == 2) {
        window.emplace(clan_window[0], clan_window[1]);
      } else {
        window = Window::point(clan_point);
      }
      Rng rng = make_stream(clan_flags.seed, 0);
      const Clan clan = build_clan(*window, params, rng, ClanOptions{clan_flags.cap, false});
      json stats{{"window", {window->a, window->b}},
                 {"lambda", params.lambda},
                 {"pi", params.pi.to_json()},
                 {"seed", clan_flags.seed},
                 {"cap", clan_flags.cap},
                 {"status", clan.status == ClanStatus::Complete ? "complete" : "capped"},
                 {"size", clan.size()},
                 {"roots", clan.roots.size()},
                 {"generations", clan.max_generation() + 1},
                 {"sampled", clan.sampled},
                 {"explored_area", clan.explored_region.area()}};
      out << stats.dump(2) << "\n";
      if (!clan_dump.empty()) write_text(clan_dump, clan.to_json().dump() + "\n");
      return kExitOk;
    }

    if (*bounds_cmd) {
      const auto law = LengthDistribution::parse(bounds_pi);
      const auto m = moments(law);
      json j = bounds_to_json(m.rho1, m.rho2);
      j["pi"] = law.to_json();
      out << j.dump(2) << "\n";
      return kExitOk;
    }

    if (*sweep) {
      std::vector<double> grid;
      if (!sweep_config.empty()) {
        const json c = load_json_file(sweep_config);
        sweep_flags.apply_config(c);
        from_config(c, "reps", sweep_reps_opt, sweep_reps);
        from_config(c, "csv", sweep_csv_opt, sweep_csv);
        if (sweep_grid_opt->count() == 0 && c.contains("grid")) {
          if (c.at("grid").is_string()) {
            sweep_grid = c.at("grid").get<std::string>();
          } else {
            grid = c.at("grid").get<std::vector<double>>();
          }
        }
      }
      if (grid.empty()) {
        if (sweep_grid.empty()) throw UsageError("--grid a:b:step is required");
        try {
          grid = parse_grid(sweep_grid);
        } catch (const ExperimentError& e) {
          throw UsageError(e.what());
        }
      }
      if (sweep_csv.empty()) throw UsageError("--csv is required");
      const auto law = sweep_flags.law();
      run_opt.cap = sweep_flags.cap;
      const auto table = lambda_grid_sweep(law, grid, sweep_reps, sweep_flags.seed, run_opt);
      std::ostringstream csv;
      write_sweep_csv(csv, table);
      write_text(sweep_csv, csv.str());
      auto meta = sweep_metadata(law, grid, sweep_reps, sweep_flags.seed, sweep_flags.cap);
      meta["csv"] = sweep_csv;
      write_text(sweep_csv + ".json", meta.dump(2) + "\n");
      out << "wrote " << table.rows.size() << " rows to " << sweep_csv << "\n";
      return kExitOk;
    }

    if (*estimate) {
      std::ifstream in(estimate_csv);
      if (!in) throw UsageError("cannot open '" + estimate_csv + "'");
      const auto table = read_sweep_csv(in);
      const auto est = estimate_lambda_c(table, estimate_degree);
      json j{{"lambda_c", est.lambda_c},
             {"degree", est.fit.degree()},
             {"requested_degree", est.fit.requested_degree},
             {"residual_norm", est.fit.residual_norm},
             {"condition", est.fit.condition},
             {"coefficients", est.fit.coeffs},
             {"center", est.fit.center},
             {"scale", est.fit.scale},
             {"warnings", est.fit.warnings}};
      for (const auto& w : est.fit.warnings) err << "warning: " << w << "\n";
      out << j.dump(2) << "\n";
      return kExitOk;
    }

    if (*branching) {
      const auto params = branching_flags.params();
      run_opt.cap = branching_flags.cap;
      json j{{"lambda", params.lambda},
             {"pi", params.pi.to_json()},
             {"seed", branching_flags.seed},
             {"reps", branching_reps},
             {"cap", branching_flags.cap}};
      if (colored) {
        const auto st = simulate_colored_branching(params, generations, branching_reps,
                                                   branching_flags.seed, run_opt);
        auto cells = json::array();
        for (const auto& c : st.cells)
          cells.push_back({{"u", c.parent_u},
                           {"v", c.child_v},
                           {"parents", c.gg_parents},
                           {"black_mean", c.black_mean},
                           {"black_se", c.black_se},
                           {"black_lower_bound", c.black_lower},
                           {"green_mean", c.green_mean},
                           {"green_se", c.green_se},
                           {"green_upper_bound", c.green_upper},
                           {"total_mean", c.total_mean},
                           {"total_se", c.total_se},
                           {"total_exact", c.total_exact}});
        j["generations"] = generations;
        j["cells"] = std::move(cells);
        j["green_children_of_black"] = st.green_children_of_black;
        j["black_parent_children"] = st.black_parent_children;
        j["birth_gap_exp_mean"] = st.birth_gap_exp_mean;
        j["birth_gap_exp_se"] = st.birth_gap_exp_se;
      } else {
        const auto st = root_length ? simulate_branching_total(params, *root_length,
                                                               branching_reps,
                                                               branching_flags.seed, run_opt)
                                    : simulate_branching_point_total(
                                          params, branching_reps, branching_flags.seed, run_opt);
        j["root"] = root_length ? json(*root_length) : json("point_generation0");
        j["mean"] = st.mean;
        j["se"] = st.se;
        j["extinct_fraction"] = st.extinct_fraction;
        j["capped"] = st.capped;
      }
      out << j.dump(2) << "\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModelError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CappedError& e) {
    err << "capped: " << e.what() << "\n";
    return kExitCapped;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace lossnet::cli
