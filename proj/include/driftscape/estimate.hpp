#ifndef DRIFTSCAPE_ESTIMATE_HPP
#define DRIFTSCAPE_ESTIMATE_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "driftscape/potential.hpp"
#include "driftscape/trajectory.hpp"
#include "driftscape/transition.hpp"
#include "driftscape/types.hpp"

namespace driftscape {

enum class Method { euler, ozaki, kessler, adaptive_kessler, ea_mcem };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// Unconstrained packing of theta, length 6K:
///   K-1 weight logits (last component's logit pinned to 0),
///   K centers (x, y),
///   K log-Cholesky triples (log L00, L10, log L11) of the information
///   matrices, and log gamma.
Eigen::VectorXd pack(const ModelParams& theta);

/// Inverse of pack. Any finite vector of a valid length maps to a valid
/// ModelParams; extreme coordinates are clamped so construction cannot
/// fail. Throws LengthMismatch otherwise.
ModelParams unpack(const Eigen::VectorXd& v);

/// Components sorted by (center x, center y); the mixture value is
/// invariant under this reordering.
ModelParams canonicalize(const ModelParams& theta);

struct OptimizerConfig {
  int restarts = 30;
  int population = 0;   // 0 = automatic
  long max_evals = 4000;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
  std::vector<std::pair<double, double>> init_box;  // per packed coordinate
};

struct OptimizeResult {
  Eigen::VectorXd best;
  double value = 0.0;
  long evaluations = 0;
  bool budget_exhausted = false;
};

/// Single derivative-free maximization run. The start point is drawn
/// uniformly in cfg.init_box (seeded by cfg.seed); the best-so-far value
/// is monotone and the eval budget is never exceeded.
OptimizeResult optimize(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const OptimizerConfig& cfg);

struct FitResult {
  ModelParams theta_hat;
  double objective = 0.0;
  Method method = Method::euler;
  int restarts_used = 0;
  double skipped_fraction = 0.0;
  long evaluations = 0;
  std::uint64_t seed = 0;
  std::vector<double> restart_objectives;
  std::vector<double> alternation_objectives;  // adaptive fits only
};

/// Initialization box for fitting k components to the given data:
/// centers in the data bounding box inflated by 20%, log-Cholesky
/// diagonals in [log 0.1, log 3], off-diagonals in [-0.5, 0.5], weight
/// logits in [-1, 1], log gamma centered on the quadratic-variation
/// estimate with half-width 1.
std::vector<std::pair<double, double>> default_init_box(
    const TrajectorySet& data, int k);

/// Maximum pseudo-likelihood fit with cfg.restarts independent restarts.
/// method must be euler, ozaki, kessler or adaptive_kessler.
FitResult fit(Method method, const TrajectorySet& data, int k,
              const OptimizerConfig& cfg);

/// Adaptive variant of the Kessler fit: gamma^2 is initialized by the
/// quadratic-variation estimator, then eta-steps (Kessler contrast over
/// eta, gamma fixed) alternate with gamma-steps (1-D maximization) until
/// the objective gain drops below cfg.tolerance or 20 rounds.
FitResult fit_adaptive_kessler(const TrajectorySet& data, int k,
                               const OptimizerConfig& cfg);

}  // namespace driftscape

#endif
