// Acceptance suite: one line per criterion, nonzero exit on any failure.
//
// Every tolerance below is fixed here in code; the runtime budget printed
// next to each criterion is part of its pass condition.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "driftscape/errors.hpp"
#include "driftscape/estimate.hpp"
#include "driftscape/exact.hpp"
#include "driftscape/io.hpp"
#include "driftscape/potential.hpp"
#include "driftscape/simbench.hpp"
#include "driftscape/transition.hpp"
#include "oracles.hpp"

using namespace driftscape;
using namespace driftscape::testing;

namespace {

struct Harness {
  int failures = 0;

  void run(const std::string& name, double budget_seconds,
           const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      ok = false;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (elapsed > budget_seconds) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + std::string("over budget");
    }
    std::printf("[%s] %s (%.1fs of %.0fs budget)%s%s\n", ok ? "PASS" : "FAIL",
                name.c_str(), elapsed, budget_seconds,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- 1
bool calculus_suite(std::string& detail) {
  Rng rng(1001);
  double worst_drift = 0.0, worst_hess = 0.0, worst_alpha = 0.0,
         worst_lap = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const ModelParams theta = random_theta(rng, 1 + (rep % 3));
    const Vec2 x(rng.uniform(-6, 6), rng.uniform(-6, 6));

    const Vec2 g_fd = fd_gradient(
        [&](const Vec2& z) { return potential_value(theta.potential(), z); },
        x);
    worst_drift = std::max(worst_drift,
                           relative_error(drift(theta.potential(), x), g_fd));

    const Mat2 h_fd = fd_jacobian(
        [&](const Vec2& z) { return drift(theta.potential(), z); }, x);
    worst_hess = std::max(
        worst_hess, relative_error(drift_jacobian(theta.potential(), x), h_fd));

    const Vec2 a_fd = fd_gradient(
        [&](const Vec2& z) { return h_value(theta, z); }, x);
    worst_alpha =
        std::max(worst_alpha, relative_error(lamperti_drift(theta, x), a_fd));

    const double h = 1e-5;
    const double lap_fd =
        (lamperti_drift(theta, x + Vec2(h, 0)).x() -
         lamperti_drift(theta, x - Vec2(h, 0)).x()) /
            (2 * h) +
        (lamperti_drift(theta, x + Vec2(0, h)).y() -
         lamperti_drift(theta, x - Vec2(0, h)).y()) /
            (2 * h);
    worst_lap = std::max(
        worst_lap, std::abs(laplacian_h(theta, x) - lap_fd) /
                       std::max(1.0, std::abs(lap_fd)));
  }
  detail = "max rel err: drift " + fmt(worst_drift) + ", hessian " +
           fmt(worst_hess) + ", alpha " + fmt(worst_alpha) + ", laplacian " +
           fmt(worst_lap);
  return worst_drift < 1e-6 && worst_hess < 1e-5 && worst_alpha < 1e-6 &&
         worst_lap < 1e-5;
}

// ---------------------------------------------------------------- 2
bool lemma_suite(std::string& detail) {
  Rng rng(1002);
  long violations = 0;
  for (int t = 0; t < 20; ++t) {
    const ModelParams theta = random_theta(rng, 1 + (t % 3));
    const EaBounds b = ea_bounds(theta);
    for (int rep = 0; rep < 100000; ++rep) {
      const Vec2 y(rng.uniform(-15, 15), rng.uniform(-15, 15));
      const double a2 = lamperti_drift(theta, y).squaredNorm();
      const double lap = laplacian_h(theta, y);
      if (a2 > b.alpha_sq_upper * (1 + 1e-12) + 1e-15) ++violations;
      if (lap < b.lap_lower - 1e-12 || lap > b.lap_upper + 1e-12) ++violations;
    }
  }
  detail = std::to_string(violations) + " violations over 2e6 points";
  return violations == 0;
}

// ---------------------------------------------------------------- 3
bool ozaki_exactness(std::string& detail) {
  Rng rng(1003);
  double worst = 0.0;
  int done = 0;
  while (done < 50) {
    Mat2 a;
    a << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
        rng.uniform(-1, 1);
    if (std::abs(a.determinant()) < 0.05) continue;
    ++done;
    const Vec2 c(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec2 x(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const double dt = rng.uniform(0.1, 2.0);
    const double gamma = rng.uniform(0.5, 2.0);
    const LinearDrift f(a, c);
    const GaussianTransition got = ozaki_transition(f, x, dt, gamma);
    const OuMoments want = ou_exact(a, c, x, dt, gamma);
    worst = std::max(worst,
                     (got.mean - want.mean).norm() / (1.0 + want.mean.norm()));
    worst = std::max(worst,
                     (got.cov - want.cov).norm() / (1.0 + want.cov.norm()));
  }
  detail = "max rel deviation " + fmt(worst) + " over 50 drifts";
  return worst < 1e-9;
}

// ---------------------------------------------------------------- 4
bool kessler_psd_rule(std::string& detail) {
  const ModelParams k1 = standard_k1();
  const PotentialDrift pd(k1.potential());
  const GaussianTransition ok = kessler_transition(pd, Vec2(0, 0), 0.5, 1.0);
  const GaussianTransition bad = kessler_transition(pd, Vec2(0, 0), 3.0, 1.0);
  const double trace_j = drift_jacobian(k1.potential(), Vec2(0, 0)).trace();
  detail = "dt=0.5 psd=" + std::string(ok.psd ? "yes" : "no") +
           ", dt=3 psd=" + std::string(bad.psd ? "yes" : "no") + ", tr J = " +
           fmt(trace_j);
  // the trace criterion: tr J = -2 < -2/3 forces a negative-trace
  // covariance at dt = 3
  return ok.psd && !bad.psd && trace_j < -2.0 / 3.0 && bad.cov.trace() < 0.0;
}

// ---------------------------------------------------------------- 5
bool exact_sampler_law(std::string& detail) {
  struct Setting {
    ModelParams theta;
    Vec2 x0;
    double dt;
    std::uint64_t seed;
  };
  ModelParams k2_gamma07(
      MixturePotential(default_scenario_params().potential().components()),
      0.7);
  const std::vector<Setting> settings = {
      {standard_k1(), Vec2(1.0, 0.0), 0.5, 2001},
      {k2_gamma07, Vec2(1.0, 0.5), 1.0, 2002},
  };
  detail.clear();
  for (const auto& s : settings) {
    const int n = 100000;
    Rng rng(s.seed);
    std::vector<Vec2> exact;
    exact.reserve(n);
    for (int i = 0; i < n; ++i) {
      exact.push_back(ea1_transition_sample(s.theta, s.x0, s.dt, rng));
    }
    std::vector<Vec2> fine;
    fine.reserve(n);
    const double h = 1e-4;
    const long sub = std::lround(s.dt / h);
    const double noise = s.theta.gamma() * std::sqrt(h);
    for (int i = 0; i < n; ++i) {
      Vec2 x = s.x0;
      for (long k = 0; k < sub; ++k) {
        x += h * drift(s.theta.potential(), x) + noise * rng.gauss2();
      }
      fine.push_back(x);
    }
    Rng test_rng(s.seed + 7);
    const double p = energy_permutation_pvalue(exact, fine, test_rng, 1500);
    detail += (detail.empty() ? "p-values " : ", ") + fmt(p);
    if (p <= 0.01) return false;
  }
  return true;
}

// ---------------------------------------------------------------- 6
bool acceptance_trend(std::string& detail) {
  const ModelParams theta = default_scenario_params();
  const ModelEaField field(theta);
  const Vec2 y = theta.potential().component(0).center / theta.gamma();
  Rng rng(1006);
  std::vector<double> rates;
  for (const double dt : {0.1, 1.0, 10.0}) {
    const int trials = 10000;
    long proposals = 0;
    for (int i = 0; i < trials; ++i) {
      proposals += ea1_bridge(field, y, y, dt, rng).proposals_used;
    }
    rates.push_back(double(trials) / double(proposals));
  }
  detail = "acceptance " + fmt(rates[0]) + " / " + fmt(rates[1]) + " / " +
           fmt(rates[2]) + " at dt 0.1/1/10";
  return rates[0] > rates[1] && rates[1] > rates[2];
}

// ---------------------------------------------------------------- 7
// constant-integrand field: alpha = 0, H = 0, laplacian = 2c, bounds
// m = 0, M = 4c, so phi = c along every bridge and rate = 2c.
class ConstantIntegrandField final : public EaField {
 public:
  explicit ConstantIntegrandField(double c) : c_(c) {
    bounds_.m = 0.0;
    bounds_.M = 4.0 * c;
    bounds_.lap_lower = 0.0;
    bounds_.lap_upper = 4.0 * c;
    bounds_.rate = 2.0 * c;
  }
  Vec2 alpha(const Vec2&) const override { return Vec2::Zero(); }
  double h(const Vec2&) const override { return 0.0; }
  double laplacian(const Vec2&) const override { return 2.0 * c_; }
  const EaBounds& bounds() const override { return bounds_; }
  double h_upper() const override { return 0.0; }

 private:
  double c_;
  EaBounds bounds_;
};

bool poisson_estimator_oracle(std::string& detail) {
  Rng rng(1007);
  detail.clear();
  for (const double c : {0.2, 1.0, 3.0}) {
    for (const double dt : {0.5, 2.0}) {
      const double want = std::exp(-c * dt);
      const ConstantIntegrandField field(c);

      // bridge acceptance frequency
      const int trials = 100000;
      long accepted_first = 0;
      for (int i = 0; i < trials; ++i) {
        const BridgeResult r =
            ea1_bridge(field, Vec2(0, 0), Vec2(0, 0), dt, rng, 100000000);
        if (r.proposals_used == 1) ++accepted_first;
      }
      const double freq = double(accepted_first) / trials;
      const double freq_se = std::sqrt(want * (1 - want) / trials);
      if (std::abs(freq - want) > 3 * freq_se) {
        detail = "bridge acceptance off at c=" + fmt(c) + " dt=" + fmt(dt) +
                 ": " + fmt(freq) + " vs " + fmt(want);
        return false;
      }

      // Poisson estimator mean through the loglik machinery
      TrajectorySet data;
      data.tracks.push_back(
          Track{"s", {0.0, dt}, {Vec2(0, 0), Vec2(0.3, 0.1)}});
      const LoglikEstimate est =
          loglik_estimate_field(field, 1.0, data, trials, 1009);
      GaussianTransition t{Vec2(0, 0), dt * Mat2::Identity(), true};
      const double log_mean =
          est.value - gaussian_logpdf(t, Vec2(0.3, 0.1));
      if (std::abs(log_mean - (-c * dt)) > 3 * est.std_error + 1e-9) {
        detail = "estimator mean off at c=" + fmt(c) + " dt=" + fmt(dt) +
                 ": log mean " + fmt(log_mean) + " vs " + fmt(-c * dt) +
                 " (3se " + fmt(3 * est.std_error) + ")";
        return false;
      }
    }
  }
  detail = "all 6 (c, dt) settings within 3 standard errors";
  return true;
}

// ---------------------------------------------------------------- 8
struct StudyOutcome {
  std::map<double, StudyReport> by_dt;
  StudyReport ea{default_scenario(), GridSpec{}};
  double pseudo_seconds = 0.0;
  double ea_seconds = 0.0;
};

StudyOutcome run_recovery_study() {
  StudyOutcome out;
  Scenario scenario = default_scenario();
  scenario.replications = 10;
  scenario.seed = 8001;

  StudyConfig cfg;
  cfg.methods = {Method::euler, Method::ozaki, Method::adaptive_kessler};
  cfg.opt.restarts = 8;
  cfg.opt.max_evals = 3000;

  const auto t0 = std::chrono::steady_clock::now();
  for (const double dt : {0.1, 1.0, 10.0}) {
    Scenario s = scenario;
    s.dt = dt;
    out.by_dt.emplace(dt, run_study(s, cfg));
  }
  out.pseudo_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const auto t1 = std::chrono::steady_clock::now();
  Scenario ea_scenario = scenario;
  ea_scenario.dt = 1.0;
  ea_scenario.replications = 3;
  StudyConfig ea_cfg;
  ea_cfg.methods = {Method::ea_mcem};
  ea_cfg.opt.restarts = 6;
  ea_cfg.opt.max_evals = 1500;
  ea_cfg.em.n_bridges = 8;
  ea_cfg.em.max_iters = 10;
  ea_cfg.em.loglik_replicates = 48;
  out.ea = run_study(ea_scenario, ea_cfg);
  out.ea_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t1)
          .count();
  return out;
}

std::vector<double> collect(const StudyReport& report, Method method,
                            const std::function<double(const StudyFit&)>& f) {
  std::vector<double> out;
  for (const auto& rep : report.replications) {
    for (const auto& fit : rep.fits) {
      if (fit.method == method) out.push_back(f(fit));
    }
  }
  return out;
}

bool recovery_study(const StudyOutcome& study, std::string& detail) {
  const auto center_hits = [&](const StudyReport& r, Method m) {
    int hits = 0;
    for (const double e :
         collect(r, m, [](const StudyFit& f) { return f.max_center_error; })) {
      if (e <= 0.5) ++hits;
    }
    return hits;
  };

  const StudyReport& at1 = study.by_dt.at(1.0);
  const StudyReport& at10 = study.by_dt.at(10.0);

  const int hits_euler = center_hits(at1, Method::euler);
  const int hits_ozaki = center_hits(at1, Method::ozaki);
  const int hits_adaptive = center_hits(at1, Method::adaptive_kessler);
  const int hits_ea = center_hits(study.ea, Method::ea_mcem);

  const double ise_euler = median(
      collect(at10, Method::euler, [](const StudyFit& f) { return f.ise; }));
  const double ise_ozaki = median(
      collect(at10, Method::ozaki, [](const StudyFit& f) { return f.ise; }));
  const double ise_adaptive = median(collect(
      at10, Method::adaptive_kessler, [](const StudyFit& f) { return f.ise; }));

  const double gamma_euler = median(collect(
      at10, Method::euler, [](const StudyFit& f) { return f.gamma_error; }));
  const double gamma_ozaki = median(collect(
      at10, Method::ozaki, [](const StudyFit& f) { return f.gamma_error; }));

  std::ostringstream d;
  d << "(a) dt=1 center hits/10: euler " << hits_euler << ", ozaki "
    << hits_ozaki << ", adaptive " << hits_adaptive << ", ea-mcem " << hits_ea
    << "/3; (b) dt=10 median ISE euler " << fmt(ise_euler) << " vs ozaki "
    << fmt(ise_ozaki) << ", adaptive " << fmt(ise_adaptive)
    << "; (c) dt=10 median |gamma err| ozaki " << fmt(gamma_ozaki)
    << " vs euler " << fmt(gamma_euler) << "; pseudo fits took "
    << fmt(study.pseudo_seconds) << "s, ea-mcem " << fmt(study.ea_seconds)
    << "s";
  detail = d.str();

  const bool a = hits_euler >= 8 && hits_ozaki >= 8 && hits_adaptive >= 8 &&
                 hits_ea == 3;
  const bool b = ise_euler > ise_ozaki && ise_euler > ise_adaptive;
  const bool c = gamma_ozaki <= gamma_euler;
  const bool budget = study.pseudo_seconds < 1800.0;
  return a && b && c && budget;
}

// ---------------------------------------------------------------- 9
bool comparison_matrix(std::string& detail) {
  Scenario scenario = default_scenario();
  scenario.dt = 1.0;
  scenario.seed = 9001;
  const TrajectorySet data = simulate(scenario, 0);

  OptimizerConfig opt;
  opt.restarts = 8;
  opt.max_evals = 3000;
  opt.seed = 9002;

  std::vector<FitResult> fits;
  fits.push_back(fit(Method::euler, data, 2, opt));
  fits.push_back(fit(Method::ozaki, data, 2, opt));
  fits.push_back(fit(Method::adaptive_kessler, data, 2, opt));
  EmConfig em;
  em.seed = 9003;
  em.n_bridges = 8;
  em.max_iters = 10;
  em.loglik_replicates = 48;
  OptimizerConfig ea_opt = opt;
  ea_opt.restarts = 6;
  ea_opt.max_evals = 1500;
  fits.push_back(fit_ea_mcem(data, 2, em, ea_opt));

  const double segments = double(data.segment_count());
  std::map<Method, double> ell_ea;
  std::printf("    estimate \\ criterion     euler     ozaki   kessler        ea\n");
  for (const auto& f : fits) {
    const double eul =
        pseudo_loglik(Scheme::euler, f.theta_hat, data).value / segments;
    const double oza =
        pseudo_loglik(Scheme::ozaki, f.theta_hat, data).value / segments;
    const double kes =
        pseudo_loglik(Scheme::kessler, f.theta_hat, data).value / segments;
    const double ea =
        loglik_estimate(f.theta_hat, data, 64, 9004).value / segments;
    ell_ea[f.method] = ea;
    std::printf("    %-18s %9.4f %9.4f %9.4f %9.4f\n",
                method_name(f.method).c_str(), eul, oza, kes, ea);
  }
  detail = "ell_EA(ea-mcem) = " + fmt(ell_ea[Method::ea_mcem]) +
           " vs ell_EA(euler) = " + fmt(ell_ea[Method::euler]);
  return ell_ea[Method::ea_mcem] >= ell_ea[Method::euler];
}

// ---------------------------------------------------------------- 10
#ifdef DRIFTSCAPE_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(DRIFTSCAPE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

bool cli_determinism(std::string& detail) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "driftscape-acceptance";
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };

  const std::string sim =
      "simulate --g 3 --n 80 --dt 0.5 --x0x 1 --x0y 0.5 --seed 42 --out ";
  if (run_cli(sim + p("a.csv")) != 0) {
    detail = "simulate failed";
    return false;
  }
  if (run_cli(sim + p("b.csv")) != 0) return false;
  if (slurp(p("a.csv")) != slurp(p("b.csv"))) {
    detail = "simulate outputs differ";
    return false;
  }

  for (const std::string method : {"euler", "ozaki", "kessler",
                                   "adaptive-kessler"}) {
    const std::string fit_cmd = "fit --method " + method + " --data " +
                                p("a.csv") +
                                " --k 1 --restarts 2 --max-evals 400 "
                                "--seed 5 --out ";
    if (run_cli(fit_cmd + p("f1.json")) != 0) {
      detail = method + " fit failed";
      return false;
    }
    if (run_cli(fit_cmd + p("f2.json")) != 0) return false;
    if (slurp(p("f1.json")) != slurp(p("f2.json"))) {
      detail = method + " fit outputs differ";
      return false;
    }
  }

  const std::string ll = "loglik --data " + p("a.csv") + " --params " +
                         p("f1.json") + " --mc 40 --seed 3 --out ";
  if (run_cli(ll + p("l1.json")) != 0 || run_cli(ll + p("l2.json")) != 0 ||
      slurp(p("l1.json")) != slurp(p("l2.json"))) {
    detail = "loglik outputs differ";
    return false;
  }

  const std::string map_cmd = "map --params " + p("f1.json") +
                              " --nx 40 --ny 40 --out ";
  if (run_cli(map_cmd + p("m1.csv")) != 0 ||
      run_cli(map_cmd + p("m2.csv")) != 0 ||
      slurp(p("m1.csv")) != slurp(p("m2.csv"))) {
    detail = "map outputs differ";
    return false;
  }

  const std::string study_cmd =
      "study --replications 1 --dts 0.5 --methods euler --seed 11 "
      "--restarts 2 --max-evals 300 --out-dir ";
  if (run_cli(study_cmd + (dir / "s1").string()) != 0 ||
      run_cli(study_cmd + (dir / "s2").string()) != 0 ||
      slurp((dir / "s1" / "report.json").string()) !=
          slurp((dir / "s2" / "report.json").string())) {
    detail = "study outputs differ";
    return false;
  }

  const std::string cmp = "compare --fits " + p("f1.json") + " " +
                          p("f2.json") + " --data " + p("a.csv") +
                          " --mc 30 --seed 7 --out ";
  if (run_cli(cmp + p("c1.json")) != 0 || run_cli(cmp + p("c2.json")) != 0 ||
      slurp(p("c1.json")) != slurp(p("c2.json"))) {
    detail = "compare outputs differ";
    return false;
  }

  detail = "simulate/fit/loglik/map/study/compare all byte-identical";
  return true;
}
#endif

}  // namespace

int main() {
  Harness h;
  h.run("criterion 1: calculus matches finite differences", 10,
        calculus_suite);
  h.run("criterion 2: appendix-lemma bounds hold", 30, lemma_suite);
  h.run("criterion 3: ozaki reproduces exact OU moments", 5, ozaki_exactness);
  h.run("criterion 4: kessler PSD rule", 1, kessler_psd_rule);
  h.run("criterion 5: exact sampler matches fine Euler", 300,
        exact_sampler_law);
  h.run("criterion 6: bridge acceptance decreases with dt", 120,
        acceptance_trend);
  h.run("criterion 7: Poisson estimator oracle", 60, poisson_estimator_oracle);

  h.run("criterion 8: recovery study orderings", 2400, [&](std::string& d) {
    const StudyOutcome study = run_recovery_study();
    return recovery_study(study, d);
  });
  h.run("criterion 9: comparison-matrix ordering", 900, comparison_matrix);
#ifdef DRIFTSCAPE_CLI_PATH
  h.run("criterion 10: CLI determinism", 300, cli_determinism);
#endif

  if (h.failures > 0) {
    std::printf("%d criterion(s) failed\n", h.failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
