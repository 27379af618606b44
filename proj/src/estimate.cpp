#include "driftscape/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftscape/cmaes.hpp"
#include "driftscape/errors.hpp"
#include "driftscape/rng.hpp"

namespace driftscape {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kRestartTag = 0xf17ull;
constexpr std::uint64_t kOptimizeTag = 0x0b7ull;
constexpr std::uint64_t kEtaStepTag = 0xadaull;

double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

Scheme scheme_of(Method m) {
  switch (m) {
    case Method::euler:
      return Scheme::euler;
    case Method::ozaki:
      return Scheme::ozaki;
    case Method::kessler:
    case Method::adaptive_kessler:
      return Scheme::kessler;
    default:
      throw InvalidParameter("method has no pseudo-likelihood scheme");
  }
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::euler:
      return "euler";
    case Method::ozaki:
      return "ozaki";
    case Method::kessler:
      return "kessler";
    case Method::adaptive_kessler:
      return "adaptive-kessler";
    case Method::ea_mcem:
      return "ea-mcem";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "euler") return Method::euler;
  if (name == "ozaki") return Method::ozaki;
  if (name == "kessler") return Method::kessler;
  if (name == "adaptive-kessler" || name == "adaptive_kessler") {
    return Method::adaptive_kessler;
  }
  if (name == "ea-mcem" || name == "ea_mcem") return Method::ea_mcem;
  throw InvalidParameter("unknown method '" + name + "'");
}

Eigen::VectorXd pack(const ModelParams& theta) {
  const auto& comps = theta.potential().components();
  const int k = static_cast<int>(comps.size());
  Eigen::VectorXd v(6 * k);
  int at = 0;
  const double ref = std::log(comps.back().weight);
  for (int i = 0; i + 1 < k; ++i) {
    v(at++) = std::log(comps[i].weight) - ref;
  }
  for (int i = 0; i < k; ++i) {
    v(at++) = comps[i].center.x();
    v(at++) = comps[i].center.y();
  }
  for (int i = 0; i < k; ++i) {
    const Mat2& c = comps[i].information;
    const double l00 = std::sqrt(c(0, 0));
    const double l10 = c(1, 0) / l00;
    const double l11 = std::sqrt(c(1, 1) - l10 * l10);
    v(at++) = std::log(l00);
    v(at++) = l10;
    v(at++) = std::log(l11);
  }
  v(at++) = std::log(theta.gamma());
  return v;
}

ModelParams unpack(const Eigen::VectorXd& v) {
  const long len = v.size();
  if (len < 6 || len % 6 != 0) {
    throw LengthMismatch("packed vector length must be a positive multiple of 6");
  }
  if (!v.allFinite()) throw InvalidParameter("packed vector must be finite");
  const int k = static_cast<int>(len / 6);

  int at = 0;
  std::vector<double> logits(static_cast<std::size_t>(k), 0.0);
  double max_logit = 0.0;
  for (int i = 0; i + 1 < k; ++i) {
    logits[static_cast<std::size_t>(i)] = clamp(v(at++), -40.0, 40.0);
    max_logit = std::max(max_logit, logits[static_cast<std::size_t>(i)]);
  }
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - max_logit);

  std::vector<GaussianComponent> comps(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    comps[static_cast<std::size_t>(i)].weight =
        std::exp(logits[static_cast<std::size_t>(i)] - max_logit) / denom;
  }
  for (int i = 0; i < k; ++i) {
    comps[static_cast<std::size_t>(i)].center =
        Vec2(v(at), v(at + 1));
    at += 2;
  }
  for (int i = 0; i < k; ++i) {
    const double l00 = std::exp(clamp(v(at++), -8.0, 8.0));
    const double l10 = clamp(v(at++), -1e4, 1e4);
    const double l11 = std::exp(clamp(v(at++), -8.0, 8.0));
    Mat2 c;
    c << l00 * l00, l00 * l10, l00 * l10, l10 * l10 + l11 * l11;
    // keep construction total: lift the spectrum if the Cholesky factors
    // collapsed the smaller eigenvalue below the validity floor
    const double lam_min = symmetric_eigenvalues(c)[0];
    if (lam_min < 1e-9) c += (1e-9 - lam_min) * Mat2::Identity();
    comps[static_cast<std::size_t>(i)].information = c;
  }
  const double gamma = std::exp(clamp(v(at++), -12.0, 12.0));
  return ModelParams(MixturePotential(std::move(comps)), gamma);
}

ModelParams canonicalize(const ModelParams& theta) {
  auto comps = theta.potential().components();
  std::sort(comps.begin(), comps.end(),
            [](const GaussianComponent& a, const GaussianComponent& b) {
              if (a.center.x() != b.center.x()) {
                return a.center.x() < b.center.x();
              }
              return a.center.y() < b.center.y();
            });
  return ModelParams(MixturePotential(std::move(comps)), theta.gamma());
}

OptimizeResult optimize(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const OptimizerConfig& cfg) {
  if (cfg.init_box.empty()) {
    throw InvalidParameter("optimize requires a nonempty init_box");
  }
  const int n = static_cast<int>(cfg.init_box.size());
  Rng rng(mix_seed(cfg.seed, {kOptimizeTag}));
  Eigen::VectorXd x0(n);
  Eigen::VectorXd scales(n);
  for (int i = 0; i < n; ++i) {
    const auto [lo, hi] = cfg.init_box[static_cast<std::size_t>(i)];
    x0(i) = rng.uniform(lo, hi);
    scales(i) = std::max(0.5 * (hi - lo), 1e-2);
  }
  CmaesOptions opts;
  opts.population = cfg.population;
  opts.max_evals = cfg.max_evals;
  opts.tolerance = cfg.tolerance;
  opts.scales = scales;
  const CmaesResult r = cmaes_maximize(objective, x0, opts, rng);
  return {r.best, r.value, r.evaluations, r.budget_exhausted};
}

std::vector<std::pair<double, double>> default_init_box(
    const TrajectorySet& data, int k) {
  if (k < 1) throw InvalidParameter("k must be at least 1");
  const auto box = bounding_box(data);
  const double padx = 0.2 * std::max(box[1] - box[0], 1e-6);
  const double pady = 0.2 * std::max(box[3] - box[2], 1e-6);
  const double log_gamma0 = 0.5 * std::log(quadratic_variation_gamma_sq(data));

  std::vector<std::pair<double, double>> init;
  init.reserve(static_cast<std::size_t>(6 * k));
  for (int i = 0; i + 1 < k; ++i) init.emplace_back(-1.0, 1.0);
  for (int i = 0; i < k; ++i) {
    init.emplace_back(box[0] - padx, box[1] + padx);
    init.emplace_back(box[2] - pady, box[3] + pady);
  }
  const double lo_diag = std::log(0.1);
  const double hi_diag = std::log(3.0);
  for (int i = 0; i < k; ++i) {
    init.emplace_back(lo_diag, hi_diag);
    init.emplace_back(-0.5, 0.5);
    init.emplace_back(lo_diag, hi_diag);
  }
  init.emplace_back(log_gamma0 - 1.0, log_gamma0 + 1.0);
  return init;
}

namespace {

// Contrast evaluation used as a black-box objective: infeasible parameter
// points report -inf instead of raising. The Kessler scheme is optimized
// through its baseline-substituted surrogate; baseline_gamma_sq is the
// quadratic-variation level of the data, computed once per fit.
double contrast_or_neg_inf(Scheme scheme, const Eigen::VectorXd& v,
                           const TrajectorySet& data,
                           double baseline_gamma_sq) {
  try {
    const ModelParams theta = unpack(v);
    const Contrast c =
        scheme == Scheme::kessler
            ? kessler_fit_contrast(theta, data, baseline_gamma_sq)
            : pseudo_loglik(scheme, theta, data);
    if (c.skipped == c.total && scheme != Scheme::kessler) return kNegInf;
    return std::isfinite(c.value) ? c.value : kNegInf;
  } catch (const Error&) {
    return kNegInf;
  }
}

FitResult finish_fit(Method method, Scheme scheme, const TrajectorySet& data,
                     const Eigen::VectorXd& best, double /*best_value*/,
                     const OptimizerConfig& cfg, long evaluations,
                     std::vector<double> restart_values) {
  FitResult out{canonicalize(unpack(best))};
  const Contrast c = pseudo_loglik(scheme, out.theta_hat, data);
  out.objective = c.value;
  out.method = method;
  out.restarts_used = static_cast<int>(restart_values.size());
  out.skipped_fraction =
      c.total > 0 ? static_cast<double>(c.skipped) / static_cast<double>(c.total)
                  : 0.0;
  out.evaluations = evaluations;
  out.seed = cfg.seed;
  out.restart_objectives = std::move(restart_values);
  return out;
}

}  // namespace

namespace {

// Restart initialization. Weight, shape and gamma coordinates start
// uniformly in the init box; center coordinates start at observed
// positions (jittered). Observed positions concentrate where the
// potential is high, so restarts begin near candidate attraction zones;
// uniform-in-box centers collapse onto the flat Brownian plateau on
// weak-potential data.
struct RestartSampler {
  RestartSampler(const TrajectorySet& data, int k_,
                 std::vector<std::pair<double, double>> box_)
      : k(k_), box(std::move(box_)) {
    for (const auto& t : data.tracks) {
      positions.insert(positions.end(), t.points.begin(), t.points.end());
    }
    const auto bbox = bounding_box(data);
    const double span = std::max(bbox[1] - bbox[0], bbox[3] - bbox[2]);
    jitter = std::clamp(0.02 * span, 0.1, 0.5);
    // Refinement-sized steps. Restart diversity comes from the seeded
    // init draws; wide per-run steps random-walk across the flat
    // Brownian plateau instead of descending into the narrow basin.
    const double center_scale = std::clamp(0.02 * span, 0.4, 0.8);
    const long n = static_cast<long>(box.size());
    scales.resize(n);
    for (long i = 0; i < n; ++i) {
      if (i < k - 1) {
        scales(i) = 0.5;  // weight logits
      } else if (i < k - 1 + 2 * k) {
        scales(i) = center_scale;
      } else if (i < 6 * k - 1) {
        const int within = static_cast<int>(i - (k - 1 + 2 * k)) % 3;
        scales(i) = within == 1 ? 0.25 : 0.4;  // off-diagonal vs log-diagonal
      } else {
        scales(i) = 0.3;  // log gamma
      }
    }
  }

  Eigen::VectorXd draw(Rng& rng) const {
    const long n = static_cast<long>(box.size());
    Eigen::VectorXd x0(n);
    for (long i = 0; i < n; ++i) {
      const auto [lo, hi] = box[static_cast<std::size_t>(i)];
      x0(i) = rng.uniform(lo, hi);
    }
    // k-means++ style seeding: later centers are drawn with probability
    // proportional to the squared distance from the ones already placed,
    // so one restart covers several distinct occupation clusters.
    std::vector<Vec2> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
      std::size_t pick = 0;
      if (chosen.empty()) {
        pick = static_cast<std::size_t>(
            rng.uniform() * static_cast<double>(positions.size()));
        pick = std::min(pick, positions.size() - 1);
      } else {
        double total = 0.0;
        std::vector<double> weight(positions.size());
        for (std::size_t i = 0; i < positions.size(); ++i) {
          double d = std::numeric_limits<double>::infinity();
          for (const auto& z : chosen) {
            d = std::min(d, (positions[i] - z).squaredNorm());
          }
          weight[i] = d;
          total += d;
        }
        double u = rng.uniform() * total;
        while (pick + 1 < positions.size() && u > weight[pick]) {
          u -= weight[pick];
          ++pick;
        }
      }
      const Vec2 center = positions[pick] + jitter * rng.gauss2();
      chosen.push_back(center);
      x0(k - 1 + 2 * c) = center.x();
      x0(k - 1 + 2 * c + 1) = center.y();
    }
    return x0;
  }

  int k;
  std::vector<std::pair<double, double>> box;
  std::vector<Vec2> positions;
  double jitter = 0.0;
  Eigen::VectorXd scales;
};

}  // namespace

FitResult fit(Method method, const TrajectorySet& data, int k,
              const OptimizerConfig& cfg) {
  if (method == Method::adaptive_kessler) {
    return fit_adaptive_kessler(data, k, cfg);
  }
  if (method == Method::ea_mcem) {
    throw InvalidParameter("ea-mcem fitting lives in the exact module");
  }
  data.validate();
  if (cfg.restarts < 1) throw InvalidParameter("restarts must be >= 1");
  const Scheme scheme = scheme_of(method);
  const auto box = cfg.init_box.empty() ? default_init_box(data, k)
                                        : cfg.init_box;
  if (box.size() != static_cast<std::size_t>(6 * k)) {
    throw LengthMismatch("init_box size must be 6k");
  }

  const double baseline_gamma_sq = quadratic_variation_gamma_sq(data);
  const auto objective = [&](const Eigen::VectorXd& v) {
    return contrast_or_neg_inf(scheme, v, data, baseline_gamma_sq);
  };

  const RestartSampler sampler(data, k, box);
  CmaesOptions copts;
  copts.population = cfg.population;
  copts.max_evals = cfg.max_evals;
  copts.tolerance = cfg.tolerance;
  copts.scales = sampler.scales;

  Eigen::VectorXd best;
  double best_value = kNegInf;
  long evaluations = 0;
  std::vector<double> restart_values;
  restart_values.reserve(static_cast<std::size_t>(cfg.restarts));
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(mix_seed(cfg.seed, {kRestartTag, static_cast<std::uint64_t>(r)}));
    const Eigen::VectorXd x0 = sampler.draw(rng);
    const CmaesResult res = cmaes_maximize(objective, x0, copts, rng);
    evaluations += res.evaluations;
    restart_values.push_back(res.value);
    if (res.value > best_value) {
      best_value = res.value;
      best = res.best;
    }
  }
  if (!std::isfinite(best_value)) {
    throw AllRestartsFailed("every restart produced a non-finite objective");
  }
  return finish_fit(method, scheme, data, best, best_value, cfg, evaluations,
                    std::move(restart_values));
}

namespace {

// Golden-section maximization of a 1-D function on [lo, hi].
double golden_max(const std::function<double(double)>& f, double lo, double hi,
                  int iters = 60) {
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc > fd ? c : d;
}

}  // namespace

FitResult fit_adaptive_kessler(const TrajectorySet& data, int k,
                               const OptimizerConfig& cfg) {
  data.validate();
  if (cfg.restarts < 1) throw InvalidParameter("restarts must be >= 1");
  const double log_gamma0 =
      0.5 * std::log(quadratic_variation_gamma_sq(data));

  auto box = cfg.init_box.empty() ? default_init_box(data, k) : cfg.init_box;
  if (box.size() != static_cast<std::size_t>(6 * k)) {
    throw LengthMismatch("init_box size must be 6k");
  }
  const std::size_t gamma_index = box.size() - 1;

  long evaluations = 0;
  double log_gamma = log_gamma0;
  const double baseline_gamma_sq = std::exp(2.0 * log_gamma0);

  // eta-only objective: the gamma coordinate is pinned.
  const auto eta_objective = [&](const Eigen::VectorXd& eta) {
    Eigen::VectorXd v(eta.size() + 1);
    v.head(eta.size()) = eta;
    v(eta.size()) = log_gamma;
    return contrast_or_neg_inf(Scheme::kessler, v, data, baseline_gamma_sq);
  };

  std::vector<std::pair<double, double>> eta_box(box.begin(),
                                                 box.begin() + gamma_index);

  const RestartSampler sampler(data, k, eta_box);
  CmaesOptions copts0;
  copts0.population = cfg.population;
  copts0.max_evals = cfg.max_evals;
  copts0.tolerance = cfg.tolerance;
  copts0.scales = sampler.scales;

  Eigen::VectorXd eta_best;
  double best_value = kNegInf;
  std::vector<double> restart_values;
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(mix_seed(cfg.seed, {kRestartTag, static_cast<std::uint64_t>(r)}));
    const Eigen::VectorXd x0 = sampler.draw(rng);
    const CmaesResult res = cmaes_maximize(eta_objective, x0, copts0, rng);
    evaluations += res.evaluations;
    restart_values.push_back(res.value);
    if (res.value > best_value) {
      best_value = res.value;
      eta_best = res.best;
    }
  }
  if (!std::isfinite(best_value)) {
    throw AllRestartsFailed("every restart produced a non-finite objective");
  }

  const auto full_vector = [&](const Eigen::VectorXd& eta, double lg) {
    Eigen::VectorXd v(eta.size() + 1);
    v.head(eta.size()) = eta;
    v(eta.size()) = lg;
    return v;
  };

  std::vector<double> round_objectives;
  round_objectives.push_back(best_value);
  for (int round = 0; round < 20; ++round) {
    const double before = best_value;

    // gamma-step
    const auto gamma_objective = [&](double lg) {
      return contrast_or_neg_inf(Scheme::kessler, full_vector(eta_best, lg),
                                 data, baseline_gamma_sq);
    };
    const double lg_candidate =
        golden_max(gamma_objective, log_gamma - 1.5, log_gamma + 1.5);
    const double lg_value = gamma_objective(lg_candidate);
    if (lg_value > best_value) {
      best_value = lg_value;
      log_gamma = lg_candidate;
    }

    // eta-step, warm started at the incumbent
    CmaesOptions copts;
    copts.population = cfg.population;
    copts.max_evals = std::max<long>(cfg.max_evals / 2, 200);
    copts.tolerance = cfg.tolerance;
    copts.scales = 0.5 * sampler.scales;
    Rng rng(mix_seed(cfg.seed,
                     {kEtaStepTag, static_cast<std::uint64_t>(round)}));
    const CmaesResult res = cmaes_maximize(eta_objective, eta_best, copts, rng);
    evaluations += res.evaluations;
    if (res.value > best_value) {
      best_value = res.value;
      eta_best = res.best;
    }

    round_objectives.push_back(best_value);
    if (best_value - before < cfg.tolerance) break;
  }

  FitResult out = finish_fit(Method::adaptive_kessler, Scheme::kessler, data,
                             full_vector(eta_best, log_gamma), best_value, cfg,
                             evaluations, std::move(restart_values));
  out.alternation_objectives = std::move(round_objectives);
  return out;
}

}  // namespace driftscape
