#ifndef DRIFTSCAPE_EXACT_HPP
#define DRIFTSCAPE_EXACT_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "driftscape/estimate.hpp"
#include "driftscape/potential.hpp"
#include "driftscape/rng.hpp"
#include "driftscape/trajectory.hpp"
#include "driftscape/types.hpp"

namespace driftscape {

/// Unit-diffusion drift data needed by the exact algorithm: the Lamperti
/// drift alpha, its antiderivative H, the Laplacian of H, global bounds,
/// and sup H (envelope constant of the biased endpoint density).
class EaField {
 public:
  virtual ~EaField() = default;
  virtual Vec2 alpha(const Vec2& y) const = 0;
  virtual double h(const Vec2& y) const = 0;
  virtual double laplacian(const Vec2& y) const = 0;
  virtual const EaBounds& bounds() const = 0;
  virtual double h_upper() const = 0;
};

/// phi(y) = (||alpha||^2 + lap H - m) / 2 for a generic field.
double phi(const EaField& f, const Vec2& y);

/// EaField of a mixture-potential model; sup H = 1/gamma^2.
class ModelEaField final : public EaField {
 public:
  explicit ModelEaField(const ModelParams& theta)
      : theta_(&theta), bounds_(ea_bounds(theta)) {}
  Vec2 alpha(const Vec2& y) const override {
    return lamperti_drift(*theta_, y);
  }
  double h(const Vec2& y) const override { return h_value(*theta_, y); }
  double laplacian(const Vec2& y) const override {
    return laplacian_h(*theta_, y);
  }
  const EaBounds& bounds() const override { return bounds_; }
  double h_upper() const override {
    return 1.0 / (theta_->gamma() * theta_->gamma());
  }

 private:
  const ModelParams* theta_;
  EaBounds bounds_;
};

/// Accepted finite skeleton of a diffusion bridge on [0, dt].
struct Skeleton {
  double dt = 0.0;
  Vec2 y0 = Vec2::Zero();
  Vec2 y1 = Vec2::Zero();
  std::vector<double> times;   // strictly inside (0, dt), sorted
  std::vector<Vec2> points;
  double bound_rate = 0.0;     // Poisson rate the skeleton was accepted under
};

/// Standard 2-D Brownian bridge from (0, y0) to (dt, y1) sampled at the
/// given interior times (sorted, strictly inside (0, dt)). Coordinates are
/// independent; sampling is sequential conditional interpolation.
std::vector<Vec2> brownian_bridge_sample(const Vec2& y0, const Vec2& y1,
                                         double dt,
                                         std::span<const double> times,
                                         Rng& rng);

struct BridgeResult {
  Skeleton skeleton;
  long proposals_used = 0;
};

inline constexpr long kDefaultProposalBudget = 1'000'000;

/// Exact conditional bridge sampling by Poisson thinning: propose a marked
/// Poisson cloud and a Brownian bridge, accept when every mark dominates
/// phi at its bridge point. Throws ProposalBudgetExceeded past the cap.
BridgeResult ea1_bridge(const EaField& f, const Vec2& y0, const Vec2& y1,
                        double dt, Rng& rng,
                        long max_proposals = kDefaultProposalBudget);
BridgeResult ea1_bridge(const ModelParams& theta, const Vec2& y0,
                        const Vec2& y1, double dt, Rng& rng,
                        long max_proposals = kDefaultProposalBudget);

/// Samples the accepted bridge at extra times conditionally on the whole
/// skeleton (piecewise Brownian bridge interpolation). extra_times must be
/// sorted, inside (0, dt) and distinct from skeleton times.
std::vector<Vec2> skeleton_interpolate(const Skeleton& skeleton,
                                       std::span<const double> extra_times,
                                       Rng& rng);

inline constexpr double kDefaultChainStep = 1.0;

/// Exact draw from the transition law of the Y process (unit diffusion)
/// over one step: biased endpoint rejection, then bridge thinning; on a
/// bridge rejection the endpoint is redrawn.
Vec2 ea1_transition_sample_y(const EaField& f, const Vec2& y0, double dt,
                             Rng& rng,
                             long max_proposals = kDefaultProposalBudget);

/// Exact draw of X_{dt} given X_0 = x0 under theta. Steps longer than
/// delta_max are chained over equal subintervals.
Vec2 ea1_transition_sample(const ModelParams& theta, const Vec2& x0,
                           double dt, Rng& rng,
                           double delta_max = kDefaultChainStep,
                           long max_proposals = kDefaultProposalBudget);

enum class GammaMode { fixed, profile };

struct EmConfig {
  int n_bridges = 10;            // bridge replicates per segment
  int n_times = 2;               // uniform evaluation times per replicate
  bool scale_times_with_dt = true;  // grow n_times as ceil(5 dt) on long gaps
  int max_iters = 30;
  double theta_tol = 1e-3;       // relative parameter-change stop rule
  std::uint64_t seed = 0;
  GammaMode gamma_mode = GammaMode::profile;
  long loglik_replicates = 64;   // Monte Carlo size for profile/objective

  int times_for(double dt) const;
};

/// Monte Carlo material of one E-step: per-segment bridge evaluation
/// points with their dt/(M N) weights, plus per-track endpoint pairs.
struct EmSample {
  struct SegmentDraw {
    double weight = 0.0;
    std::vector<Vec2> points;
  };
  std::vector<SegmentDraw> segments;
  std::vector<std::pair<Vec2, Vec2>> track_endpoints;
};

/// Draws bridges under the sampling field at uniform times per segment.
/// Deterministic given the seed; segments use keyed substreams.
EmSample draw_em_points(const EaField& sampling_field,
                        const TrajectorySet& ydata, const EmConfig& cfg,
                        std::uint64_t seed);

/// Q(theta) evaluated on frozen E-step material:
/// sum_g [H(Y_end) - H(Y_start)] - (1/2) sum_seg w sum_pts (lap H + ||alpha||^2).
double em_q_value(const EaField& evaluation_field, const EmSample& sample);

/// One-shot Monte Carlo EM intermediate quantity Q^N(theta, theta_p) on
/// data already in Y coordinates.
double mcem_q(const ModelParams& theta, const ModelParams& theta_p,
              const TrajectorySet& ydata, const EmConfig& cfg);

struct LoglikEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_mc = 0;
  int capped_segments = 0;  // segments integrated through a midpoint split
};

/// Unbiased Monte Carlo estimator of the exact log-likelihood of the data
/// (X coordinates) under theta, one Poisson-estimator average per segment.
LoglikEstimate loglik_estimate(const ModelParams& theta,
                               const TrajectorySet& data, long n_mc,
                               std::uint64_t seed);

/// Test hook: same estimator over an arbitrary field. gamma enters only
/// through the Lamperti change of variables of the observations.
LoglikEstimate loglik_estimate_field(const EaField& f, double gamma,
                                     const TrajectorySet& data, long n_mc,
                                     std::uint64_t seed);

/// Monte Carlo EM fit. theta starts from an Ozaki pseudo-likelihood fit
/// (or `init` when provided); each iteration freezes an E-step sample and
/// maximizes Q over eta, with gamma fixed or profiled via loglik_estimate.
FitResult fit_ea_mcem(const TrajectorySet& data, int k, const EmConfig& cfg,
                      const OptimizerConfig& opt,
                      const std::optional<ModelParams>& init = std::nullopt);

}  // namespace driftscape

#endif
