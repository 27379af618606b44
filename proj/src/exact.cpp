#include "driftscape/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "driftscape/cmaes.hpp"
#include "driftscape/errors.hpp"

namespace driftscape {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr std::uint64_t kEmPointsTag = 0xe57e9ull;
constexpr std::uint64_t kEmIterTag = 0xe417e2ull;
constexpr std::uint64_t kLoglikTag = 0x109117ull;
constexpr std::uint64_t kRetryTag = 0x2e72ull;
constexpr std::uint64_t kProfileTag = 0x9f0f11eull;
constexpr std::uint64_t kFinalTag = 0xf17a1ull;
constexpr double kRateDtCap = 50.0;

void check_interior_times(std::span<const double> times, double dt) {
  double prev = 0.0;
  for (double t : times) {
    if (!(t > prev) || !(t < dt)) {
      throw UnsortedTimes("times must be sorted and strictly inside (0, dt)");
    }
    prev = t;
  }
}

double gaussian2_logpdf_iso(const Vec2& y, const Vec2& mean, double var) {
  return -kLog2Pi - std::log(var) - 0.5 * (y - mean).squaredNorm() / var;
}

}  // namespace

double phi(const EaField& f, const Vec2& y) {
  return 0.5 * (f.alpha(y).squaredNorm() + f.laplacian(y) - f.bounds().m);
}

std::vector<Vec2> brownian_bridge_sample(const Vec2& y0, const Vec2& y1,
                                         double dt,
                                         std::span<const double> times,
                                         Rng& rng) {
  check_interior_times(times, dt);
  std::vector<Vec2> out;
  out.reserve(times.size());
  double t_prev = 0.0;
  Vec2 y_prev = y0;
  for (double t : times) {
    const double remaining = dt - t_prev;
    const double frac = (t - t_prev) / remaining;
    const Vec2 mean = y_prev + frac * (y1 - y_prev);
    const double sd = std::sqrt((t - t_prev) * (dt - t) / remaining);
    const Vec2 y = mean + sd * rng.gauss2();
    out.push_back(y);
    t_prev = t;
    y_prev = y;
  }
  return out;
}

namespace {

// One thinning proposal: marked Poisson cloud plus bridge. Empty optional
// on rejection.
std::optional<Skeleton> try_bridge_proposal(const EaField& f, const Vec2& y0,
                                            const Vec2& y1, double dt,
                                            Rng& rng) {
  const double rate = f.bounds().rate;
  const long count = rng.poisson(rate * dt);

  Skeleton s;
  s.dt = dt;
  s.y0 = y0;
  s.y1 = y1;
  s.bound_rate = rate;
  if (count == 0) return s;

  std::vector<std::pair<double, double>> marked(
      static_cast<std::size_t>(count));
  for (auto& [t, u] : marked) {
    t = rng.uniform(0.0, dt);
    u = rng.uniform(0.0, rate);
  }
  std::sort(marked.begin(), marked.end());

  s.times.resize(marked.size());
  for (std::size_t i = 0; i < marked.size(); ++i) s.times[i] = marked[i].first;
  s.points = brownian_bridge_sample(y0, y1, dt, s.times, rng);

  for (std::size_t i = 0; i < marked.size(); ++i) {
    if (phi(f, s.points[i]) > marked[i].second) return std::nullopt;
  }
  return s;
}

}  // namespace

BridgeResult ea1_bridge(const EaField& f, const Vec2& y0, const Vec2& y1,
                        double dt, Rng& rng, long max_proposals) {
  for (long used = 1; used <= max_proposals; ++used) {
    if (auto s = try_bridge_proposal(f, y0, y1, dt, rng)) {
      return {std::move(*s), used};
    }
  }
  throw ProposalBudgetExceeded("bridge proposal budget exceeded");
}

BridgeResult ea1_bridge(const ModelParams& theta, const Vec2& y0,
                        const Vec2& y1, double dt, Rng& rng,
                        long max_proposals) {
  const ModelEaField f(theta);
  return ea1_bridge(f, y0, y1, dt, rng, max_proposals);
}

std::vector<Vec2> skeleton_interpolate(const Skeleton& skeleton,
                                       std::span<const double> extra_times,
                                       Rng& rng) {
  check_interior_times(extra_times, skeleton.dt);

  std::vector<double> knot_times;
  std::vector<Vec2> knot_points;
  knot_times.reserve(skeleton.times.size() + extra_times.size() + 2);
  knot_points.reserve(knot_times.capacity());
  knot_times.push_back(0.0);
  knot_points.push_back(skeleton.y0);
  knot_times.insert(knot_times.end(), skeleton.times.begin(),
                    skeleton.times.end());
  knot_points.insert(knot_points.end(), skeleton.points.begin(),
                     skeleton.points.end());
  knot_times.push_back(skeleton.dt);
  knot_points.push_back(skeleton.y1);

  std::vector<Vec2> out;
  out.reserve(extra_times.size());
  for (double t : extra_times) {
    const auto it =
        std::lower_bound(knot_times.begin(), knot_times.end(), t);
    const std::size_t right = static_cast<std::size_t>(it - knot_times.begin());
    if (right < knot_times.size() && knot_times[right] == t) {
      throw TimeCollision("interpolation time collides with a knot");
    }
    const std::size_t left = right - 1;
    const double t_l = knot_times[left];
    const double t_r = knot_times[right];
    const double frac = (t - t_l) / (t_r - t_l);
    const Vec2 mean =
        knot_points[left] + frac * (knot_points[right] - knot_points[left]);
    const double sd = std::sqrt((t - t_l) * (t_r - t) / (t_r - t_l));
    const Vec2 y = mean + sd * rng.gauss2();
    knot_times.insert(knot_times.begin() + static_cast<long>(right), t);
    knot_points.insert(knot_points.begin() + static_cast<long>(right), y);
    out.push_back(y);
  }
  return out;
}

Vec2 ea1_transition_sample_y(const EaField& f, const Vec2& y0, double dt,
                             Rng& rng, long max_proposals) {
  const double h_sup = f.h_upper();
  const double sd = std::sqrt(dt);
  long used = 0;
  while (true) {
    // endpoint from the biased density, by rejection against N(y0, dt I)
    Vec2 y1;
    while (true) {
      if (++used > max_proposals) {
        throw ProposalBudgetExceeded("endpoint proposal budget exceeded");
      }
      y1 = y0 + sd * rng.gauss2();
      if (rng.uniform() <= std::exp(f.h(y1) - h_sup)) break;
    }
    if (++used > max_proposals) {
      throw ProposalBudgetExceeded("bridge proposal budget exceeded");
    }
    if (try_bridge_proposal(f, y0, y1, dt, rng)) return y1;
    // bridge rejected: the whole joint proposal restarts from the endpoint
  }
}

Vec2 ea1_transition_sample(const ModelParams& theta, const Vec2& x0,
                           double dt, Rng& rng, double delta_max,
                           long max_proposals) {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  const ModelEaField f(theta);
  const long chunks =
      std::max<long>(1, static_cast<long>(std::ceil(dt / delta_max)));
  const double step = dt / static_cast<double>(chunks);
  Vec2 y = x0 / theta.gamma();
  for (long i = 0; i < chunks; ++i) {
    y = ea1_transition_sample_y(f, y, step, rng, max_proposals);
  }
  return theta.gamma() * y;
}

int EmConfig::times_for(double dt) const {
  if (!scale_times_with_dt) return n_times;
  const int scaled = static_cast<int>(std::ceil(5.0 * dt));
  return std::max(n_times, scaled);
}

EmSample draw_em_points(const EaField& sampling_field,
                        const TrajectorySet& ydata, const EmConfig& cfg,
                        std::uint64_t seed) {
  ydata.validate();
  EmSample sample;
  sample.track_endpoints.reserve(ydata.tracks.size());
  sample.segments.reserve(static_cast<std::size_t>(ydata.segment_count()));

  std::uint64_t track_index = 0;
  for (const auto& track : ydata.tracks) {
    sample.track_endpoints.emplace_back(track.points.front(),
                                        track.points.back());
    for (std::size_t i = 0; i + 1 < track.times.size(); ++i) {
      const double dt = track.times[i + 1] - track.times[i];
      const int m = cfg.times_for(dt);
      EmSample::SegmentDraw draw;
      draw.weight = dt / (static_cast<double>(m) * cfg.n_bridges);
      draw.points.reserve(static_cast<std::size_t>(m) * cfg.n_bridges);
      for (int rep = 0; rep < cfg.n_bridges; ++rep) {
        Rng rng(mix_seed(seed, {kEmPointsTag, track_index,
                                static_cast<std::uint64_t>(i),
                                static_cast<std::uint64_t>(rep)}));
        std::vector<double> times(static_cast<std::size_t>(m));
        for (auto& t : times) t = rng.uniform(0.0, dt);
        std::sort(times.begin(), times.end());
        const BridgeResult bridge = ea1_bridge(
            sampling_field, track.points[i], track.points[i + 1], dt, rng);
        const auto pts = skeleton_interpolate(bridge.skeleton, times, rng);
        draw.points.insert(draw.points.end(), pts.begin(), pts.end());
      }
      sample.segments.push_back(std::move(draw));
    }
    ++track_index;
  }
  return sample;
}

double em_q_value(const EaField& evaluation_field, const EmSample& sample) {
  double q = 0.0;
  for (const auto& [start, end] : sample.track_endpoints) {
    q += evaluation_field.h(end) - evaluation_field.h(start);
  }
  for (const auto& seg : sample.segments) {
    double acc = 0.0;
    for (const auto& y : seg.points) {
      acc += evaluation_field.laplacian(y) +
             evaluation_field.alpha(y).squaredNorm();
    }
    q -= 0.5 * seg.weight * acc;
  }
  return q;
}

double mcem_q(const ModelParams& theta, const ModelParams& theta_p,
              const TrajectorySet& ydata, const EmConfig& cfg) {
  const ModelEaField sampling(theta_p);
  const EmSample sample = draw_em_points(sampling, ydata, cfg, cfg.seed);
  const ModelEaField evaluation(theta);
  return em_q_value(evaluation, sample);
}

namespace {

struct SegmentEstimate {
  double mean = 0.0;      // estimate of exp(-m dt / 2) E[exp(-int phi)]
  double var_mean = 0.0;  // variance of that mean
  bool capped = false;
};

// Gauss-Hermite rule (physicists' weight exp(-x^2)) via Golub-Welsch.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussHermite& gauss_hermite_32() {
  static const GaussHermite rule = [] {
    constexpr int n = 32;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      const double off = std::sqrt(0.5 * i);
      jac(i, i - 1) = off;
      jac(i - 1, i) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
    GaussHermite r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double total = std::sqrt(std::numbers::pi);
    for (int i = 0; i < n; ++i) {
      r.nodes[i] = eig.eigenvalues()(i);
      const double v0 = eig.eigenvectors()(0, i);
      r.weights[i] = total * v0 * v0;
    }
    return r;
  }();
  return rule;
}

// Single Poisson-estimator replicate of exp(-m dt/2) E[exp(-int_0^dt phi)].
double poisson_estimator_replicate(const EaField& f, const Vec2& y0,
                                   const Vec2& y1, double dt, Rng& rng) {
  const EaBounds& b = f.bounds();
  const double lead = std::exp(-0.5 * b.m * dt);
  const long count = rng.poisson(b.rate * dt);
  if (count == 0) return lead;
  std::vector<double> times(static_cast<std::size_t>(count));
  for (auto& t : times) t = rng.uniform(0.0, dt);
  std::sort(times.begin(), times.end());
  const auto pts = brownian_bridge_sample(y0, y1, dt, times, rng);
  double product = lead;
  for (const auto& y : pts) {
    product *= 1.0 - phi(f, y) / b.rate;
    if (product == 0.0) return 0.0;
  }
  return product;
}

SegmentEstimate estimate_plain(const EaField& f, const Vec2& y0,
                               const Vec2& y1, double dt, long n_mc,
                               std::uint64_t seed) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long i = 0; i < n_mc; ++i) {
    Rng rng(mix_seed(seed, {static_cast<std::uint64_t>(i)}));
    const double est = poisson_estimator_replicate(f, y0, y1, dt, rng);
    sum += est;
    sum_sq += est * est;
  }
  SegmentEstimate out;
  out.mean = sum / static_cast<double>(n_mc);
  const double var =
      std::max(0.0, (sum_sq - sum * sum / static_cast<double>(n_mc)) /
                        std::max<long>(n_mc - 1, 1));
  out.var_mean = var / static_cast<double>(n_mc);
  return out;
}

// Estimate of the Y-transition density q(y0 -> y1; dt) and its variance.
// Long segments (rate dt beyond the cap) are split at a midpoint that is
// integrated out by a tensor Gauss-Hermite rule.
struct DensityEstimate {
  double value = 0.0;
  double var = 0.0;
  bool capped = false;
};

DensityEstimate transition_density_estimate(const EaField& f, const Vec2& y0,
                                            const Vec2& y1, double dt,
                                            long n_mc, std::uint64_t seed,
                                            int depth) {
  const EaBounds& b = f.bounds();
  if (b.rate * dt <= kRateDtCap || depth >= 6) {
    const SegmentEstimate e = estimate_plain(f, y0, y1, dt, n_mc, seed);
    const double base =
        std::exp(gaussian2_logpdf_iso(y1, y0, dt) + f.h(y1) - f.h(y0));
    return {base * e.mean, base * base * e.var_mean, false};
  }

  const GaussHermite& gh = gauss_hermite_32();
  const Vec2 mid = 0.5 * (y0 + y1);
  const double s = std::sqrt(0.25 * dt);       // bridge midpoint sd
  const double scale = std::numbers::sqrt2 * s;
  const double half = 0.5 * dt;

  double value = 0.0;
  double var = 0.0;
  std::uint64_t node_id = 0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
      const Vec2 z = mid + scale * Vec2(gh.nodes[i], gh.nodes[j]);
      const double w = gh.weights[i] * gh.weights[j] / std::numbers::pi;
      const double log_envelope = gaussian2_logpdf_iso(z, mid, s * s);
      const DensityEstimate left = transition_density_estimate(
          f, y0, z, half, n_mc, mix_seed(seed, {0xa, node_id}), depth + 1);
      const DensityEstimate right = transition_density_estimate(
          f, z, y1, half, n_mc, mix_seed(seed, {0xb, node_id}), depth + 1);
      const double inv_envelope = std::exp(-log_envelope);
      value += w * left.value * right.value * inv_envelope;
      var += w * w * inv_envelope * inv_envelope *
             (right.value * right.value * left.var +
              left.value * left.value * right.var);
      ++node_id;
    }
  }
  return {value, var, true};
}

}  // namespace

LoglikEstimate loglik_estimate_field(const EaField& f, double gamma,
                                     const TrajectorySet& data, long n_mc,
                                     std::uint64_t seed) {
  data.validate();
  if (n_mc < 1) throw InvalidParameter("n_mc must be >= 1");

  LoglikEstimate out;
  out.n_mc = n_mc;
  double var_log = 0.0;

  std::uint64_t track_index = 0;
  for (const auto& track : data.tracks) {
    for (std::size_t i = 0; i + 1 < track.times.size(); ++i) {
      const double dt = track.times[i + 1] - track.times[i];
      const Vec2 y0 = track.points[i] / gamma;
      const Vec2 y1 = track.points[i + 1] / gamma;
      const std::uint64_t seg_seed = mix_seed(
          seed, {kLoglikTag, track_index, static_cast<std::uint64_t>(i)});

      DensityEstimate est;
      long replicates = n_mc;
      for (int attempt = 0;; ++attempt) {
        est = transition_density_estimate(
            f, y0, y1, dt, replicates,
            mix_seed(seg_seed, {kRetryTag, static_cast<std::uint64_t>(attempt)}),
            0);
        if (est.value > 0.0) break;
        if (attempt >= 3) {
          throw NonPositiveEstimate(
              "segment transition-density estimate stayed non-positive");
        }
        replicates *= 4;
      }
      if (est.capped) ++out.capped_segments;
      out.value += std::log(est.value) - 2.0 * std::log(gamma);
      var_log += est.var / (est.value * est.value);
    }
    ++track_index;
  }
  out.std_error = std::sqrt(var_log);
  return out;
}

LoglikEstimate loglik_estimate(const ModelParams& theta,
                               const TrajectorySet& data, long n_mc,
                               std::uint64_t seed) {
  const ModelEaField f(theta);
  return loglik_estimate_field(f, theta.gamma(), data, n_mc, seed);
}

FitResult fit_ea_mcem(const TrajectorySet& data, int k, const EmConfig& cfg,
                      const OptimizerConfig& opt,
                      const std::optional<ModelParams>& init) {
  data.validate();

  long evaluations = 0;
  int restarts_used = 0;
  std::vector<double> restart_values;
  ModelParams theta = [&] {
    if (init) return canonicalize(*init);
    FitResult warm = fit(Method::ozaki, data, k, opt);
    evaluations += warm.evaluations;
    restarts_used = warm.restarts_used;
    restart_values = std::move(warm.restart_objectives);
    return warm.theta_hat;
  }();

  const auto assemble = [](const Eigen::VectorXd& eta, double log_gamma) {
    Eigen::VectorXd v(eta.size() + 1);
    v.head(eta.size()) = eta;
    v(eta.size()) = log_gamma;
    return v;
  };

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Eigen::VectorXd packed = pack(theta);
    const Eigen::VectorXd eta0 = packed.head(packed.size() - 1);
    const double log_gamma = packed(packed.size() - 1);
    const double gamma = std::exp(log_gamma);

    const TrajectorySet ydata = scale_positions(data, 1.0 / gamma);
    const ModelEaField sampling(theta);
    const EmSample sample = draw_em_points(
        sampling, ydata, cfg,
        mix_seed(cfg.seed, {kEmIterTag, static_cast<std::uint64_t>(iter)}));

    const auto q_objective = [&](const Eigen::VectorXd& eta) -> double {
      try {
        const ModelParams candidate = unpack(assemble(eta, log_gamma));
        const ModelEaField field(candidate);
        const double q = em_q_value(field, sample);
        return std::isfinite(q)
                   ? q
                   : -std::numeric_limits<double>::infinity();
      } catch (const Error&) {
        return -std::numeric_limits<double>::infinity();
      }
    };

    CmaesOptions copts;
    copts.population = opt.population;
    copts.max_evals = opt.max_evals;
    copts.tolerance = opt.tolerance;
    copts.scales = Eigen::VectorXd::Constant(eta0.size(), 0.25);
    Rng rng(mix_seed(cfg.seed, {kEmIterTag, static_cast<std::uint64_t>(iter),
                                0x3a5ull}));
    const CmaesResult mstep = cmaes_maximize(q_objective, eta0, copts, rng);
    evaluations += mstep.evaluations;

    Eigen::VectorXd eta_new = eta0;
    if (std::isfinite(mstep.value) && mstep.value >= q_objective(eta0)) {
      eta_new = mstep.best;
    }

    double log_gamma_new = log_gamma;
    if (cfg.gamma_mode == GammaMode::profile) {
      const std::uint64_t profile_seed = mix_seed(
          cfg.seed, {kProfileTag, static_cast<std::uint64_t>(iter)});
      const auto profile_objective = [&](double lg) -> double {
        try {
          const ModelParams candidate = unpack(assemble(eta_new, lg));
          return loglik_estimate(candidate, data, cfg.loglik_replicates,
                                 profile_seed)
              .value;
        } catch (const Error&) {
          return -std::numeric_limits<double>::infinity();
        }
      };
      const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
      double a = log_gamma - 0.75, b = log_gamma + 0.75;
      double c = b - inv_phi * (b - a);
      double d = a + inv_phi * (b - a);
      double fc = profile_objective(c), fd = profile_objective(d);
      for (int it2 = 0; it2 < 24; ++it2) {
        if (fc > fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - inv_phi * (b - a);
          fc = profile_objective(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + inv_phi * (b - a);
          fd = profile_objective(d);
        }
      }
      const double lg_candidate = fc > fd ? c : d;
      if (std::max(fc, fd) >= profile_objective(log_gamma)) {
        log_gamma_new = lg_candidate;
      }
    }

    const ModelParams theta_new = unpack(assemble(eta_new, log_gamma_new));
    const Eigen::VectorXd packed_new = pack(theta_new);
    const double change =
        (packed_new - packed).norm() / (1.0 + packed.norm());
    theta = theta_new;
    if (change < cfg.theta_tol) break;
  }

  FitResult out{canonicalize(theta)};
  out.method = Method::ea_mcem;
  out.objective =
      loglik_estimate(out.theta_hat, data, 4 * cfg.loglik_replicates,
                      mix_seed(cfg.seed, {kFinalTag}))
          .value;
  out.restarts_used = restarts_used;
  out.skipped_fraction = 0.0;
  out.evaluations = evaluations;
  out.seed = cfg.seed;
  out.restart_objectives = std::move(restart_values);
  return out;
}

}  // namespace driftscape
