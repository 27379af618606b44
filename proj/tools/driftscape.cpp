// driftscape command line: simulate / fit / loglik / map / study / compare.
//
// Exit codes: 0 success, 2 data or configuration error, 3 numeric or
// estimation failure, 64 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include "CLI11.hpp"

#include "driftscape/errors.hpp"
#include "driftscape/estimate.hpp"
#include "driftscape/exact.hpp"
#include "driftscape/io.hpp"
#include "driftscape/potential.hpp"
#include "driftscape/simbench.hpp"
#include "driftscape/transition.hpp"

namespace ds = driftscape;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitUsage = 64;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ds::ConfigError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ds::ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ds::Error("cannot write '" + path + "'");
  out << text;
}

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

ds::ModelParams load_params(const std::string& path) {
  return ds::params_from_document(read_json_file(path));
}

// Recenters on the centroid and rescales to unit spread, so shared files
// carry no absolute coordinates.
ds::TrajectorySet anonymize(const ds::TrajectorySet& data) {
  ds::Vec2 mean = ds::Vec2::Zero();
  long count = 0;
  for (const auto& t : data.tracks) {
    for (const auto& p : t.points) {
      mean += p;
      ++count;
    }
  }
  mean /= static_cast<double>(count);
  double spread = 0.0;
  for (const auto& t : data.tracks) {
    for (const auto& p : t.points) spread += (p - mean).squaredNorm();
  }
  spread = std::sqrt(spread / static_cast<double>(count));
  if (spread <= 0.0) spread = 1.0;
  ds::TrajectorySet out = data;
  for (auto& t : out.tracks) {
    for (auto& p : t.points) p = (p - mean) / spread;
  }
  return out;
}

struct CommonGridFlags {
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  int nx = 200, ny = 200;
  bool has_range = false;
};

int cmd_simulate(const std::string& params_path, int g, int n, double dt,
                 double x0x, double x0y, std::uint64_t seed, int replication,
                 const std::string& mode, bool anon,
                 const std::string& out_path) {
  ds::Scenario scenario{params_path.empty() ? ds::default_scenario_params()
                                            : load_params(params_path)};
  scenario.g = g;
  scenario.n = n;
  scenario.dt = dt;
  scenario.x0 = ds::Vec2(x0x, x0y);
  scenario.seed = seed;
  const ds::SimMode sim_mode =
      mode == "euler-fine" ? ds::SimMode::euler_fine : ds::SimMode::exact;
  ds::TrajectorySet data = ds::simulate(scenario, replication, sim_mode);
  if (anon) data = anonymize(data);
  std::ofstream out(out_path);
  if (!out) throw ds::Error("cannot write '" + out_path + "'");
  out << "# driftscape simulate seed=" << seed
      << " replication=" << replication << " dt=" << ds::format_double(dt)
      << " mode=" << mode << (anon ? " anonymized" : "") << "\n";
  ds::write_trajectories(out, data);
  std::cout << "simulate: wrote " << data.tracks.size() << " tracks ("
            << data.segment_count() << " segments) to " << out_path << "\n";
  return kExitOk;
}

int cmd_fit(const std::string& method_name_, const std::string& data_path,
            int k, int restarts, long max_evals, std::uint64_t seed,
            const std::string& out_path) {
  const ds::Method method = ds::method_from_name(method_name_);
  const ds::TrajectorySet data = ds::parse_trajectories_file(data_path);

  ds::OptimizerConfig opt;
  opt.restarts = restarts;
  opt.max_evals = max_evals;
  opt.seed = seed;

  ds::FitResult result = [&] {
    if (method == ds::Method::ea_mcem) {
      ds::EmConfig em;
      em.seed = seed;
      return ds::fit_ea_mcem(data, k, em, opt);
    }
    return ds::fit(method, data, k, opt);
  }();

  json out = ds::fit_result_to_json(result);
  out["config"] = ds::optimizer_config_to_json(opt);
  out["data"] = data_path;
  out["k"] = k;
  if (!out_path.empty()) write_json_file(out_path, out);
  std::cout << "fit: method=" << ds::method_name(result.method)
            << " objective=" << ds::format_double(result.objective)
            << " skipped_fraction="
            << ds::format_double(result.skipped_fraction) << "\n";
  return kExitOk;
}

int cmd_loglik(const std::string& data_path, const std::string& params_path,
               long n_mc, std::uint64_t seed, const std::string& out_path) {
  const ds::TrajectorySet data = ds::parse_trajectories_file(data_path);
  const ds::ModelParams theta = load_params(params_path);
  const ds::LoglikEstimate est = ds::loglik_estimate(theta, data, n_mc, seed);
  json out = {{"schema_version", ds::kSchemaVersion},
              {"value", est.value},
              {"std_error", est.std_error},
              {"n_mc", est.n_mc},
              {"capped_segments", est.capped_segments},
              {"seed", seed},
              {"data", data_path}};
  if (!out_path.empty()) write_json_file(out_path, out);
  std::cout << "loglik: value=" << ds::format_double(est.value)
            << " std_error=" << ds::format_double(est.std_error) << "\n";
  return kExitOk;
}

int cmd_map(const std::string& params_path, const std::string& truth_path,
            const CommonGridFlags& gf, const std::string& out_path,
            const std::string& error_out, const std::string& metrics_out) {
  const ds::ModelParams theta = load_params(params_path);
  std::optional<ds::ModelParams> truth;
  if (!truth_path.empty()) truth = load_params(truth_path);

  ds::GridSpec grid;
  if (gf.has_range) {
    grid = {gf.xmin, gf.xmax, gf.ymin, gf.ymax, gf.nx, gf.ny};
  } else {
    grid = ds::default_grid(truth ? truth->potential() : theta.potential());
    grid.nx = gf.nx;
    grid.ny = gf.ny;
  }

  {
    std::ofstream out(out_path);
    if (!out) throw ds::Error("cannot write '" + out_path + "'");
    ds::write_grid_csv(out, grid, ds::potential_grid(theta.potential(), grid));
  }
  std::cout << "map: wrote " << grid.nx << "x" << grid.ny << " grid to "
            << out_path << "\n";

  if (truth) {
    const ds::MapMetrics metrics =
        ds::map_metrics(theta.potential(), truth->potential(), grid);
    if (!error_out.empty()) {
      std::ofstream out(error_out);
      if (!out) throw ds::Error("cannot write '" + error_out + "'");
      ds::write_grid_csv(out, grid, metrics.abs_error);
    }
    json mj = {{"schema_version", ds::kSchemaVersion},
               {"ise", metrics.ise},
               {"grid",
                {{"xmin", grid.xmin},
                 {"xmax", grid.xmax},
                 {"ymin", grid.ymin},
                 {"ymax", grid.ymax},
                 {"nx", grid.nx},
                 {"ny", grid.ny}}}};
    if (!metrics_out.empty()) write_json_file(metrics_out, mj);
    std::cout << "map: ise=" << ds::format_double(metrics.ise) << "\n";
  }
  return kExitOk;
}

int cmd_study(const std::string& config_path, const std::string& out_dir,
              int replications, const std::string& dts,
              const std::string& methods, std::uint64_t seed, int restarts,
              long max_evals, int ea_reps, bool dump_data) {
  ds::RunConfig cfg{ds::default_scenario(), ds::StudyConfig{}};
  if (!config_path.empty()) {
    cfg = ds::run_config_from_json(read_json_file(config_path));
  } else {
    cfg.scenario.replications = replications;
    cfg.scenario.seed = seed;
    cfg.study.opt.restarts = restarts;
    cfg.study.opt.max_evals = max_evals;
    cfg.study.ea_mcem_replications = ea_reps;
    if (!methods.empty()) {
      cfg.study.methods.clear();
      std::stringstream ss(methods);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        cfg.study.methods.push_back(ds::method_from_name(tok));
      }
    }
  }

  std::vector<double> dt_list;
  {
    std::stringstream ss(dts);
    std::string tok;
    while (std::getline(ss, tok, ',')) dt_list.push_back(std::stod(tok));
  }
  if (dt_list.empty()) dt_list.push_back(cfg.scenario.dt);

  std::filesystem::create_directories(out_dir);
  json all = {{"schema_version", ds::kSchemaVersion},
              {"config", ds::run_config_to_json(cfg)},
              {"studies", json::array()}};
  for (double dt : dt_list) {
    ds::Scenario scenario = cfg.scenario;
    scenario.dt = dt;
    const ds::StudyReport report = ds::run_study(scenario, cfg.study);
    json rj = ds::study_report_to_json(report);
    rj["dt"] = dt;
    all["studies"].push_back(rj);

    if (dump_data) {
      for (int rep = 0; rep < scenario.replications; ++rep) {
        const ds::TrajectorySet data = ds::simulate(scenario, rep);
        ds::write_trajectories_file(
            out_dir + "/data_dt" + ds::format_double(dt) + "_rep" +
                std::to_string(rep) + ".csv",
            data);
      }
    }
    std::cout << "study: dt=" << ds::format_double(dt) << " done ("
              << report.replications.size() << " replications)\n";
  }
  write_json_file(out_dir + "/report.json", all);

  // true-map grid for external plotting
  const ds::GridSpec grid =
      cfg.study.grid ? *cfg.study.grid
                     : ds::default_grid(cfg.scenario.theta_true.potential());
  {
    std::ofstream out(out_dir + "/true_map.csv");
    ds::write_grid_csv(
        out, grid,
        ds::potential_grid(cfg.scenario.theta_true.potential(), grid));
  }
  std::cout << "study: report written to " << out_dir << "/report.json\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& fit_paths,
                const std::string& data_path, long n_mc, std::uint64_t seed,
                const std::string& out_path) {
  const ds::TrajectorySet data = ds::parse_trajectories_file(data_path);
  const double segments = static_cast<double>(data.segment_count());

  struct Row {
    std::string path;
    std::string method;
    double euler, ozaki, kessler, ea;
  };
  std::vector<Row> rows;
  for (const auto& path : fit_paths) {
    const json fj = read_json_file(path);
    const ds::ModelParams theta = ds::params_from_document(fj);
    Row row;
    row.path = path;
    row.method = fj.contains("method") ? fj.at("method").get<std::string>()
                                       : std::string("params");
    row.euler =
        ds::pseudo_loglik(ds::Scheme::euler, theta, data).value / segments;
    row.ozaki =
        ds::pseudo_loglik(ds::Scheme::ozaki, theta, data).value / segments;
    row.kessler =
        ds::pseudo_loglik(ds::Scheme::kessler, theta, data).value / segments;
    row.ea = ds::loglik_estimate(theta, data, n_mc, seed).value / segments;
    rows.push_back(row);
  }

  const auto col_max = [&](auto proj) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (proj(rows[i]) > proj(rows[best])) best = i;
    }
    return best;
  };
  const std::size_t best_euler = col_max([](const Row& r) { return r.euler; });
  const std::size_t best_ozaki = col_max([](const Row& r) { return r.ozaki; });
  const std::size_t best_kessler =
      col_max([](const Row& r) { return r.kessler; });
  const std::size_t best_ea = col_max([](const Row& r) { return r.ea; });

  json out = {{"schema_version", ds::kSchemaVersion},
              {"normalization", "per segment"},
              {"n_mc", n_mc},
              {"seed", seed},
              {"rows", json::array()}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out["rows"].push_back({{"fit", rows[i].path},
                           {"method", rows[i].method},
                           {"criteria",
                            {{"euler", rows[i].euler},
                             {"ozaki", rows[i].ozaki},
                             {"kessler", rows[i].kessler},
                             {"ea", rows[i].ea}}}});
  }
  out["column_max"] = {{"euler", rows[best_euler].method},
                       {"ozaki", rows[best_ozaki].method},
                       {"kessler", rows[best_kessler].method},
                       {"ea", rows[best_ea].method}};
  if (!out_path.empty()) write_json_file(out_path, out);

  std::cout << "estimate \\ criterion      euler      ozaki    kessler         ea\n";
  for (const auto& row : rows) {
    std::printf("%-20s %10.4f %10.4f %10.4f %10.4f\n", row.method.c_str(),
                row.euler, row.ozaki, row.kessler, row.ea);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Potential-based SDE movement models: simulation and fitting"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw trajectories from a model");
  std::string sim_params, sim_mode = "exact", sim_out;
  int sim_g = 10, sim_n = 500, sim_rep = 0;
  double sim_dt = 1.0, sim_x0x = 3.0, sim_x0y = 2.0;
  std::uint64_t sim_seed = 0;
  bool sim_anon = false;
  sim->add_option("--params", sim_params, "parameter JSON (default built-in)");
  sim->add_option("--g", sim_g, "number of tracks");
  sim->add_option("--n", sim_n, "points per track");
  sim->add_option("--dt", sim_dt, "sampling step");
  sim->add_option("--x0x", sim_x0x, "start x");
  sim->add_option("--x0y", sim_x0y, "start y");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--replication", sim_rep, "replication index");
  sim->add_option("--mode", sim_mode, "exact or euler-fine")
      ->check(CLI::IsMember({"exact", "euler-fine"}));
  sim->add_flag("--anonymize", sim_anon, "recenter and rescale coordinates");
  sim->add_option("--out", sim_out, "output CSV")->required();

  // fit
  auto* fitc = app.add_subcommand("fit", "Maximum pseudo-likelihood fit");
  std::string fit_method, fit_data, fit_out;
  int fit_k = 1, fit_restarts = 30;
  long fit_evals = 4000;
  std::uint64_t fit_seed = 0;
  fitc->add_option("--method", fit_method, "estimation method")
      ->required()
      ->check(CLI::IsMember(
          {"euler", "ozaki", "kessler", "adaptive-kessler", "ea-mcem"}));
  fitc->add_option("--data", fit_data, "trajectory CSV")->required();
  fitc->add_option("--k", fit_k, "number of mixture components");
  fitc->add_option("--restarts", fit_restarts, "optimizer restarts");
  fitc->add_option("--max-evals", fit_evals, "objective budget per restart");
  fitc->add_option("--seed", fit_seed, "RNG seed");
  fitc->add_option("--out", fit_out, "output JSON");

  // loglik
  auto* llc = app.add_subcommand("loglik", "Unbiased log-likelihood estimate");
  std::string ll_data, ll_params, ll_out;
  long ll_mc = 100;
  std::uint64_t ll_seed = 0;
  llc->add_option("--data", ll_data, "trajectory CSV")->required();
  llc->add_option("--params", ll_params, "parameter or fit JSON")->required();
  llc->add_option("--mc", ll_mc, "Monte Carlo replicates per segment");
  llc->add_option("--seed", ll_seed, "RNG seed");
  llc->add_option("--out", ll_out, "output JSON");

  // map
  auto* mapc = app.add_subcommand("map", "Potential surface grid export");
  std::string map_params, map_truth, map_out, map_err_out, map_metrics;
  CommonGridFlags gf;
  mapc->add_option("--params", map_params, "parameter or fit JSON")
      ->required();
  mapc->add_option("--truth", map_truth, "true parameter JSON for errors");
  auto* oxmin = mapc->add_option("--xmin", gf.xmin);
  mapc->add_option("--xmax", gf.xmax)->needs(oxmin);
  mapc->add_option("--ymin", gf.ymin)->needs(oxmin);
  mapc->add_option("--ymax", gf.ymax)->needs(oxmin);
  mapc->add_option("--nx", gf.nx);
  mapc->add_option("--ny", gf.ny);
  mapc->add_option("--out", map_out, "surface CSV")->required();
  mapc->add_option("--error-out", map_err_out, "absolute-error grid CSV");
  mapc->add_option("--metrics", map_metrics, "metrics JSON");

  // study
  auto* studyc = app.add_subcommand("study", "Replicated simulation study");
  std::string st_config, st_dir, st_dts = "", st_methods;
  int st_reps = 10, st_restarts = 8, st_ea_reps = -1;
  long st_evals = 2000;
  std::uint64_t st_seed = 0;
  bool st_dump = false;
  studyc->add_option("--config", st_config, "run-config JSON");
  studyc->add_option("--out-dir", st_dir, "output directory")->required();
  studyc->add_option("--replications", st_reps, "replications per dt");
  studyc->add_option("--dts", st_dts, "comma-separated dt list");
  studyc->add_option("--methods", st_methods, "comma-separated methods");
  studyc->add_option("--seed", st_seed, "study seed");
  studyc->add_option("--restarts", st_restarts, "optimizer restarts");
  studyc->add_option("--max-evals", st_evals, "objective budget per restart");
  studyc->add_option("--ea-reps", st_ea_reps,
                     "cap ea-mcem to this many replications (-1 = all)");
  studyc->add_flag("--dump-data", st_dump, "write per-replication data CSVs");

  // compare
  auto* cmpc = app.add_subcommand(
      "compare", "Evaluate fits under every likelihood criterion");
  std::vector<std::string> cmp_fits;
  std::string cmp_data, cmp_out;
  long cmp_mc = 100;
  std::uint64_t cmp_seed = 0;
  cmpc->add_option("--fits", cmp_fits, "fit JSON files")
      ->required()
      ->expected(-2);
  cmpc->add_option("--data", cmp_data, "trajectory CSV")->required();
  cmpc->add_option("--mc", cmp_mc, "Monte Carlo replicates per segment");
  cmpc->add_option("--seed", cmp_seed, "RNG seed");
  cmpc->add_option("--out", cmp_out, "output JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return kExitUsage;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_params, sim_g, sim_n, sim_dt, sim_x0x, sim_x0y,
                          sim_seed, sim_rep, sim_mode, sim_anon, sim_out);
    }
    if (fitc->parsed()) {
      return cmd_fit(fit_method, fit_data, fit_k, fit_restarts, fit_evals,
                     fit_seed, fit_out);
    }
    if (llc->parsed()) {
      return cmd_loglik(ll_data, ll_params, ll_mc, ll_seed, ll_out);
    }
    if (mapc->parsed()) {
      gf.has_range = oxmin->count() > 0;
      return cmd_map(map_params, map_truth, gf, map_out, map_err_out,
                     map_metrics);
    }
    if (studyc->parsed()) {
      return cmd_study(st_config, st_dir, st_reps, st_dts, st_methods,
                       st_seed, st_restarts, st_evals, st_ea_reps, st_dump);
    }
    if (cmpc->parsed()) {
      return cmd_compare(cmp_fits, cmp_data, cmp_mc, cmp_seed, cmp_out);
    }
  } catch (const ds::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ds::NonMonotoneTime& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ds::TooFewPoints& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ds::EmptyData& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ds::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitData;
  } catch (const ds::InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitData;
  } catch (const ds::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
