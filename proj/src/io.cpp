#include "driftscape/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "driftscape/errors.hpp"

namespace driftscape {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kTrajectoryHeader = "track_id,t,x,y";

std::string strip(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_number(const std::string& field, int line) {
  const std::string t = strip(field);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ParseError(line, "invalid number '" + field + "'");
  }
  return value;
}

}  // namespace

TrajectorySet parse_trajectories(std::istream& in) {
  TrajectorySet out;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<std::string> finished_ids;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = strip(line);
    if (t.empty() || t.front() == '#') continue;
    if (!header_seen) {
      if (t != kTrajectoryHeader) {
        throw ParseError(line_no, "expected header '" +
                                      std::string(kTrajectoryHeader) + "'");
      }
      header_seen = true;
      continue;
    }

    std::array<std::string, 4> fields;
    {
      std::size_t start = 0;
      for (int f = 0; f < 4; ++f) {
        const std::size_t comma = t.find(',', start);
        if (f < 3) {
          if (comma == std::string::npos) {
            throw ParseError(line_no, "expected 4 comma-separated fields");
          }
          fields[static_cast<std::size_t>(f)] = t.substr(start, comma - start);
          start = comma + 1;
        } else {
          if (comma != std::string::npos) {
            throw ParseError(line_no, "expected 4 comma-separated fields");
          }
          fields[3] = t.substr(start);
        }
      }
    }

    const std::string id = strip(fields[0]);
    if (id.empty()) throw ParseError(line_no, "empty track_id");
    const double time = parse_number(fields[1], line_no);
    const double x = parse_number(fields[2], line_no);
    const double y = parse_number(fields[3], line_no);

    if (out.tracks.empty() || out.tracks.back().id != id) {
      for (const auto& done : finished_ids) {
        if (done == id) {
          throw ParseError(line_no,
                           "rows of track '" + id + "' are not contiguous");
        }
      }
      if (!out.tracks.empty()) finished_ids.push_back(out.tracks.back().id);
      out.tracks.push_back(Track{id, {}, {}});
    }
    Track& track = out.tracks.back();
    if (!track.times.empty() && !(time > track.times.back())) {
      throw NonMonotoneTime(id, line_no);
    }
    track.times.push_back(time);
    track.points.emplace_back(x, y);
  }

  if (!header_seen) throw ParseError(line_no, "missing header");
  if (out.tracks.empty()) throw EmptyData("no data rows");
  for (const auto& track : out.tracks) {
    if (track.times.size() < 2) throw TooFewPoints(track.id);
  }
  return out;
}

TrajectorySet parse_trajectories_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EmptyData("cannot open '" + path + "'");
  return parse_trajectories(in);
}

void write_trajectories(std::ostream& out, const TrajectorySet& data) {
  out << kTrajectoryHeader << "\n";
  for (const auto& track : data.tracks) {
    for (std::size_t i = 0; i < track.times.size(); ++i) {
      out << track.id << ',' << format_double(track.times[i]) << ','
          << format_double(track.points[i].x()) << ','
          << format_double(track.points[i].y()) << "\n";
    }
  }
}

void write_trajectories_file(const std::string& path,
                             const TrajectorySet& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_trajectories(out, data);
}

json params_to_json(const ModelParams& theta) {
  json components = json::array();
  for (const auto& c : theta.potential().components()) {
    components.push_back(
        {{"weight", c.weight},
         {"center", {c.center.x(), c.center.y()}},
         {"information",
          {{c.information(0, 0), c.information(0, 1)},
           {c.information(1, 0), c.information(1, 1)}}}});
  }
  return {{"gamma", theta.gamma()}, {"components", components}};
}

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> keys,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) {
      if (key == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

ModelParams params_from_json(const json& j) {
  try {
    reject_unknown_keys(j, {"gamma", "components"}, "parameter record");
    const double gamma = j.at("gamma").get<double>();
    std::vector<GaussianComponent> comps;
    for (const auto& cj : j.at("components")) {
      reject_unknown_keys(cj, {"weight", "center", "information"},
                          "component record");
      GaussianComponent c;
      c.weight = cj.at("weight").get<double>();
      const auto& center = cj.at("center");
      c.center = Vec2(center.at(0).get<double>(), center.at(1).get<double>());
      const auto& info = cj.at("information");
      c.information << info.at(0).at(0).get<double>(),
          info.at(0).at(1).get<double>(), info.at(1).at(0).get<double>(),
          info.at(1).at(1).get<double>();
      comps.push_back(c);
    }
    return ModelParams(MixturePotential(std::move(comps)), gamma);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed parameter record: ") + e.what());
  }
}

json fit_result_to_json(const FitResult& fit) {
  return {{"schema_version", kSchemaVersion},
          {"method", method_name(fit.method)},
          {"objective", fit.objective},
          {"theta_hat", params_to_json(fit.theta_hat)},
          {"restarts_used", fit.restarts_used},
          {"skipped_fraction", fit.skipped_fraction},
          {"evaluations", fit.evaluations},
          {"seed", fit.seed},
          {"restart_objectives", fit.restart_objectives}};
}

ModelParams params_from_document(const json& j) {
  if (j.contains("theta_hat")) return params_from_json(j.at("theta_hat"));
  return params_from_json(j);
}

json optimizer_config_to_json(const OptimizerConfig& cfg) {
  return {{"restarts", cfg.restarts},
          {"population", cfg.population},
          {"max_evals", cfg.max_evals},
          {"tolerance", cfg.tolerance},
          {"seed", cfg.seed}};
}

json em_config_to_json(const EmConfig& cfg) {
  return {{"n_bridges", cfg.n_bridges},
          {"n_times", cfg.n_times},
          {"scale_times_with_dt", cfg.scale_times_with_dt},
          {"max_iters", cfg.max_iters},
          {"theta_tol", cfg.theta_tol},
          {"seed", cfg.seed},
          {"gamma_mode",
           cfg.gamma_mode == GammaMode::fixed ? "fixed" : "profile"},
          {"loglik_replicates", cfg.loglik_replicates}};
}

namespace {

json grid_to_json(const GridSpec& g) {
  return {{"xmin", g.xmin}, {"xmax", g.xmax}, {"ymin", g.ymin},
          {"ymax", g.ymax}, {"nx", g.nx},     {"ny", g.ny}};
}

GridSpec grid_from_json(const json& j) {
  reject_unknown_keys(j, {"xmin", "xmax", "ymin", "ymax", "nx", "ny"},
                      "grid");
  GridSpec g;
  g.xmin = j.at("xmin").get<double>();
  g.xmax = j.at("xmax").get<double>();
  g.ymin = j.at("ymin").get<double>();
  g.ymax = j.at("ymax").get<double>();
  if (j.contains("nx")) g.nx = j.at("nx").get<int>();
  if (j.contains("ny")) g.ny = j.at("ny").get<int>();
  return g;
}

}  // namespace

json study_report_to_json(const StudyReport& report) {
  json reps = json::array();
  for (const auto& rep : report.replications) {
    json fits = json::array();
    for (const auto& f : rep.fits) {
      fits.push_back({{"method", method_name(f.method)},
                      {"estimate", params_to_json(f.result.theta_hat)},
                      {"objective", f.result.objective},
                      {"skipped_fraction", f.result.skipped_fraction},
                      {"evaluations", f.result.evaluations},
                      {"fit_seed", f.result.seed},
                      {"ise", f.ise},
                      {"max_center_error", f.max_center_error},
                      {"gamma_error", f.gamma_error}});
    }
    reps.push_back({{"replication", rep.replication},
                    {"sim_seed", rep.sim_seed},
                    {"fits", fits},
                    {"failures", rep.failures}});
  }

  json summaries = json::array();
  for (const auto& s : summarize(report)) {
    summaries.push_back({{"method", method_name(s.method)},
                         {"fits", s.fits},
                         {"ise", {{"median", s.ise_median},
                                  {"p2.5", s.ise_lo},
                                  {"p97.5", s.ise_hi}}},
                         {"max_center_error",
                          {{"median", s.center_err_median},
                           {"p2.5", s.center_err_lo},
                           {"p97.5", s.center_err_hi}}},
                         {"gamma_error", {{"median", s.gamma_err_median},
                                          {"p2.5", s.gamma_err_lo},
                                          {"p97.5", s.gamma_err_hi}}},
                         {"skipped_fraction_median", s.skipped_median}});
  }

  return {{"schema_version", kSchemaVersion},
          {"scenario",
           {{"theta_true", params_to_json(report.scenario.theta_true)},
            {"g", report.scenario.g},
            {"n", report.scenario.n},
            {"dt", report.scenario.dt},
            {"x0", {report.scenario.x0.x(), report.scenario.x0.y()}},
            {"replications", report.scenario.replications},
            {"seed", report.scenario.seed}}},
          {"grid", grid_to_json(report.grid)},
          {"replications", reps},
          {"summary", summaries}};
}

void write_grid_csv(std::ostream& out, const GridSpec& grid,
                    const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(grid.nx) * grid.ny) {
    throw DegenerateGrid("grid/value size mismatch");
  }
  out << "x,y,value\n";
  const double dx = (grid.xmax - grid.xmin) / grid.nx;
  const double dy = (grid.ymax - grid.ymin) / grid.ny;
  for (int iy = 0; iy < grid.ny; ++iy) {
    const double y = grid.ymin + (iy + 0.5) * dy;
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double x = grid.xmin + (ix + 0.5) * dx;
      out << format_double(x) << ',' << format_double(y) << ','
          << format_double(values[static_cast<std::size_t>(iy) * grid.nx + ix])
          << "\n";
    }
  }
}

RunConfig run_config_from_json(const json& j) {
  try {
    reject_unknown_keys(j,
                        {"scenario", "methods", "optimizer", "em", "grid",
                         "ea_mcem_replications", "seed"},
                        "run config");
    const json& sj = j.at("scenario");
    reject_unknown_keys(
        sj, {"theta_true", "g", "n", "dt", "x0", "replications", "seed"},
        "scenario");
    Scenario scenario{sj.contains("theta_true")
                          ? params_from_json(sj.at("theta_true"))
                          : default_scenario_params()};
    if (sj.contains("g")) scenario.g = sj.at("g").get<int>();
    if (sj.contains("n")) scenario.n = sj.at("n").get<int>();
    if (sj.contains("dt")) scenario.dt = sj.at("dt").get<double>();
    if (sj.contains("x0")) {
      scenario.x0 = Vec2(sj.at("x0").at(0).get<double>(),
                         sj.at("x0").at(1).get<double>());
    }
    if (sj.contains("replications")) {
      scenario.replications = sj.at("replications").get<int>();
    }
    if (sj.contains("seed")) {
      scenario.seed = sj.at("seed").get<std::uint64_t>();
    }
    if (j.contains("seed")) scenario.seed = j.at("seed").get<std::uint64_t>();

    StudyConfig study;
    if (j.contains("methods")) {
      study.methods.clear();
      for (const auto& mj : j.at("methods")) {
        study.methods.push_back(method_from_name(mj.get<std::string>()));
      }
    }
    if (j.contains("optimizer")) {
      const json& oj = j.at("optimizer");
      reject_unknown_keys(
          oj, {"restarts", "population", "max_evals", "tolerance", "seed"},
          "optimizer");
      if (oj.contains("restarts")) {
        study.opt.restarts = oj.at("restarts").get<int>();
      }
      if (oj.contains("population")) {
        study.opt.population = oj.at("population").get<int>();
      }
      if (oj.contains("max_evals")) {
        study.opt.max_evals = oj.at("max_evals").get<long>();
      }
      if (oj.contains("tolerance")) {
        study.opt.tolerance = oj.at("tolerance").get<double>();
      }
      if (oj.contains("seed")) {
        study.opt.seed = oj.at("seed").get<std::uint64_t>();
      }
    }
    if (j.contains("em")) {
      const json& ej = j.at("em");
      reject_unknown_keys(ej,
                          {"n_bridges", "n_times", "scale_times_with_dt",
                           "max_iters", "theta_tol", "seed", "gamma_mode",
                           "loglik_replicates"},
                          "em");
      if (ej.contains("n_bridges")) {
        study.em.n_bridges = ej.at("n_bridges").get<int>();
      }
      if (ej.contains("n_times")) {
        study.em.n_times = ej.at("n_times").get<int>();
      }
      if (ej.contains("scale_times_with_dt")) {
        study.em.scale_times_with_dt =
            ej.at("scale_times_with_dt").get<bool>();
      }
      if (ej.contains("max_iters")) {
        study.em.max_iters = ej.at("max_iters").get<int>();
      }
      if (ej.contains("theta_tol")) {
        study.em.theta_tol = ej.at("theta_tol").get<double>();
      }
      if (ej.contains("seed")) {
        study.em.seed = ej.at("seed").get<std::uint64_t>();
      }
      if (ej.contains("gamma_mode")) {
        const std::string mode = ej.at("gamma_mode").get<std::string>();
        if (mode == "fixed") {
          study.em.gamma_mode = GammaMode::fixed;
        } else if (mode == "profile") {
          study.em.gamma_mode = GammaMode::profile;
        } else {
          throw ConfigError("gamma_mode must be 'fixed' or 'profile'");
        }
      }
      if (ej.contains("loglik_replicates")) {
        study.em.loglik_replicates = ej.at("loglik_replicates").get<long>();
      }
    }
    if (j.contains("grid")) study.grid = grid_from_json(j.at("grid"));
    if (j.contains("ea_mcem_replications")) {
      study.ea_mcem_replications = j.at("ea_mcem_replications").get<int>();
    }
    return RunConfig{std::move(scenario), std::move(study)};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
}

json run_config_to_json(const RunConfig& cfg) {
  json methods = json::array();
  for (Method m : cfg.study.methods) methods.push_back(method_name(m));
  json j = {{"scenario",
             {{"theta_true", params_to_json(cfg.scenario.theta_true)},
              {"g", cfg.scenario.g},
              {"n", cfg.scenario.n},
              {"dt", cfg.scenario.dt},
              {"x0", {cfg.scenario.x0.x(), cfg.scenario.x0.y()}},
              {"replications", cfg.scenario.replications},
              {"seed", cfg.scenario.seed}}},
            {"methods", methods},
            {"optimizer", optimizer_config_to_json(cfg.study.opt)},
            {"em", em_config_to_json(cfg.study.em)},
            {"ea_mcem_replications", cfg.study.ea_mcem_replications}};
  if (cfg.study.grid) j["grid"] = grid_to_json(*cfg.study.grid);
  return j;
}

}  // namespace driftscape
