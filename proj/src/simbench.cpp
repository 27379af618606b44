#include "driftscape/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftscape/parallel.hpp"
#include "driftscape/rng.hpp"
#include "driftscape/transition.hpp"

namespace driftscape {

namespace {

constexpr std::uint64_t kSimTag = 0x51aull;
constexpr std::uint64_t kFitTag = 0xf1ull;

}  // namespace

std::uint64_t simulation_seed(std::uint64_t scenario_seed, int replication) {
  return mix_seed(scenario_seed,
                  {kSimTag, static_cast<std::uint64_t>(replication)});
}

TrajectorySet simulate(const Scenario& scenario, int replication,
                       SimMode mode) {
  if (scenario.g < 1 || scenario.n < 2) {
    throw InvalidParameter("scenario needs g >= 1 and n >= 2");
  }
  const std::uint64_t rep_seed = simulation_seed(scenario.seed, replication);
  const ModelEaField field(scenario.theta_true);
  const PotentialDrift fine_drift(scenario.theta_true.potential());
  const double gamma = scenario.theta_true.gamma();

  TrajectorySet out;
  out.tracks.resize(static_cast<std::size_t>(scenario.g));
  for (int g = 0; g < scenario.g; ++g) {
    Rng rng(mix_seed(rep_seed, {static_cast<std::uint64_t>(g)}));
    Track& track = out.tracks[static_cast<std::size_t>(g)];
    track.id = "sim-" + std::to_string(g);
    track.times.reserve(static_cast<std::size_t>(scenario.n));
    track.points.reserve(static_cast<std::size_t>(scenario.n));
    Vec2 x = scenario.x0;
    track.times.push_back(0.0);
    track.points.push_back(x);
    for (int i = 1; i < scenario.n; ++i) {
      if (mode == SimMode::exact) {
        const long chunks = std::max<long>(
            1, static_cast<long>(std::ceil(scenario.dt / kDefaultChainStep)));
        const double step = scenario.dt / static_cast<double>(chunks);
        Vec2 y = x / gamma;
        for (long c = 0; c < chunks; ++c) {
          y = ea1_transition_sample_y(field, y, step, rng);
        }
        x = gamma * y;
      } else {
        const int substeps = 1000;
        const double h = scenario.dt / substeps;
        const double noise = gamma * std::sqrt(h);
        for (int s = 0; s < substeps; ++s) {
          x += h * fine_drift.value(x) + noise * rng.gauss2();
        }
      }
      track.times.push_back(scenario.dt * i);
      track.points.push_back(x);
    }
  }
  return out;
}

GridSpec default_grid(const MixturePotential& truth) {
  GridSpec grid;
  bool first = true;
  for (const auto& c : truth.components()) {
    const double lam_min = symmetric_eigenvalues(c.information)[0];
    const double radius = 4.0 / std::sqrt(lam_min);
    if (first) {
      grid.xmin = c.center.x() - radius;
      grid.xmax = c.center.x() + radius;
      grid.ymin = c.center.y() - radius;
      grid.ymax = c.center.y() + radius;
      first = false;
    } else {
      grid.xmin = std::min(grid.xmin, c.center.x() - radius);
      grid.xmax = std::max(grid.xmax, c.center.x() + radius);
      grid.ymin = std::min(grid.ymin, c.center.y() - radius);
      grid.ymax = std::max(grid.ymax, c.center.y() + radius);
    }
  }
  grid.nx = 200;
  grid.ny = 200;
  return grid;
}

namespace {

void check_grid(const GridSpec& grid) {
  if (grid.nx < 1 || grid.ny < 1 || !(grid.xmax > grid.xmin) ||
      !(grid.ymax > grid.ymin)) {
    throw DegenerateGrid("grid must have positive extent and size");
  }
}

}  // namespace

std::vector<double> potential_grid(const MixturePotential& p,
                                   const GridSpec& grid) {
  check_grid(grid);
  const double dx = (grid.xmax - grid.xmin) / grid.nx;
  const double dy = (grid.ymax - grid.ymin) / grid.ny;
  std::vector<double> values(static_cast<std::size_t>(grid.nx) * grid.ny);
  for (int iy = 0; iy < grid.ny; ++iy) {
    const double y = grid.ymin + (iy + 0.5) * dy;
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double x = grid.xmin + (ix + 0.5) * dx;
      values[static_cast<std::size_t>(iy) * grid.nx + ix] =
          potential_value(p, Vec2(x, y));
    }
  }
  return values;
}

MapMetrics map_metrics(const MixturePotential& est,
                       const MixturePotential& truth, const GridSpec& grid) {
  check_grid(grid);
  const auto v_est = potential_grid(est, grid);
  const auto v_true = potential_grid(truth, grid);
  const double cell = ((grid.xmax - grid.xmin) / grid.nx) *
                      ((grid.ymax - grid.ymin) / grid.ny);
  MapMetrics m;
  m.grid = grid;
  m.abs_error.resize(v_est.size());
  for (std::size_t i = 0; i < v_est.size(); ++i) {
    const double diff = v_est[i] - v_true[i];
    m.abs_error[i] = std::abs(diff);
    m.ise += diff * diff * cell;
  }
  return m;
}

ModelParams default_scenario_params() {
  Mat2 c1, c2;
  c1 << 0.5, 0.1, 0.1, 0.3;
  c2 << 0.35, -0.12, -0.12, 0.45;
  std::vector<GaussianComponent> comps = {
      {0.55, Vec2(0.0, 0.0), c1},
      {0.45, Vec2(6.0, 4.0), c2},
  };
  return ModelParams(MixturePotential(std::move(comps)), 0.45);
}

Scenario default_scenario() {
  Scenario s{default_scenario_params()};
  s.g = 10;
  s.n = 500;
  s.dt = 1.0;
  s.x0 = Vec2(3.0, 2.0);
  s.replications = 10;
  s.seed = 0;
  return s;
}

namespace {

double center_error(const ModelParams& est, const ModelParams& truth) {
  const auto& a = canonicalize(est).potential().components();
  const auto& b = canonicalize(truth).potential().components();
  if (a.size() != b.size()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, (a[i].center - b[i].center).norm());
  }
  return worst;
}

}  // namespace

StudyReport run_study(const Scenario& scenario, const StudyConfig& config) {
  if (scenario.replications < 1) {
    throw InvalidParameter("replications must be >= 1");
  }
  StudyReport report{scenario,
                     config.grid ? *config.grid
                                 : default_grid(scenario.theta_true.potential())};
  report.replications.resize(
      static_cast<std::size_t>(scenario.replications));

  parallel_for(scenario.replications, [&](long rep) {
    StudyReplication& row =
        report.replications[static_cast<std::size_t>(rep)];
    row.replication = static_cast<int>(rep);
    row.sim_seed = simulation_seed(scenario.seed, static_cast<int>(rep));
    const TrajectorySet data =
        simulate(scenario, static_cast<int>(rep), SimMode::exact);

    const int k = scenario.theta_true.potential().size();
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const Method method = config.methods[mi];
      if (method == Method::ea_mcem && config.ea_mcem_replications >= 0 &&
          rep >= config.ea_mcem_replications) {
        continue;
      }
      const std::uint64_t fit_seed =
          mix_seed(scenario.seed, {kFitTag, static_cast<std::uint64_t>(rep),
                                   static_cast<std::uint64_t>(mi)});
      try {
        FitResult fit_result = [&] {
          if (method == Method::ea_mcem) {
            EmConfig em = config.em;
            em.seed = fit_seed;
            OptimizerConfig opt = config.opt;
            opt.seed = fit_seed;
            return fit_ea_mcem(data, k, em, opt);
          }
          OptimizerConfig opt = config.opt;
          opt.seed = fit_seed;
          return fit(method, data, k, opt);
        }();
        StudyFit sf{method, std::move(fit_result)};
        sf.ise = map_metrics(sf.result.theta_hat.potential(),
                             scenario.theta_true.potential(), report.grid)
                     .ise;
        sf.max_center_error =
            center_error(sf.result.theta_hat, scenario.theta_true);
        sf.gamma_error = std::abs(sf.result.theta_hat.gamma() -
                                  scenario.theta_true.gamma());
        row.fits.push_back(std::move(sf));
      } catch (const Error& e) {
        row.failures.push_back(method_name(method) + ": " + e.what());
      }
    }
  });
  return report;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - std::floor(pos);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

double median(std::vector<double> values) {
  return quantile(std::move(values), 0.5);
}

std::vector<MethodSummary> summarize(const StudyReport& report) {
  std::map<Method, std::vector<const StudyFit*>> by_method;
  for (const auto& rep : report.replications) {
    for (const auto& f : rep.fits) by_method[f.method].push_back(&f);
  }
  std::vector<MethodSummary> out;
  for (const auto& [method, fits] : by_method) {
    MethodSummary s;
    s.method = method;
    s.fits = static_cast<int>(fits.size());
    std::vector<double> ise, cerr, gerr, skipped;
    for (const auto* f : fits) {
      ise.push_back(f->ise);
      cerr.push_back(f->max_center_error);
      gerr.push_back(f->gamma_error);
      skipped.push_back(f->result.skipped_fraction);
    }
    s.ise_median = median(ise);
    s.ise_lo = quantile(ise, 0.025);
    s.ise_hi = quantile(ise, 0.975);
    s.center_err_median = median(cerr);
    s.center_err_lo = quantile(cerr, 0.025);
    s.center_err_hi = quantile(cerr, 0.975);
    s.gamma_err_median = median(gerr);
    s.gamma_err_lo = quantile(gerr, 0.025);
    s.gamma_err_hi = quantile(gerr, 0.975);
    s.skipped_median = median(skipped);
    out.push_back(s);
  }
  return out;
}

}  // namespace driftscape
