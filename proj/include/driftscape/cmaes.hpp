#ifndef DRIFTSCAPE_CMAES_HPP
#define DRIFTSCAPE_CMAES_HPP

#include <functional>

#include "driftscape/rng.hpp"
#include "driftscape/types.hpp"

namespace driftscape {

struct CmaesOptions {
  int population = 0;        // 0 selects 4 + floor(3 ln n)
  long max_evals = 4000;
  double tolerance = 1e-8;   // stop once a 30-generation window improves less
  double sigma0 = 1.0;
  Eigen::VectorXd scales;    // initial axis lengths; empty means all ones
};

struct CmaesResult {
  Eigen::VectorXd best;
  double value = 0.0;
  long evaluations = 0;
  bool budget_exhausted = false;
};

/// Covariance matrix adaptation evolution strategy, maximizing form.
/// The objective may return -inf for infeasible points. Deterministic
/// given the rng state; best-so-far is monotone by construction.
CmaesResult cmaes_maximize(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& x0, const CmaesOptions& opts, Rng& rng);

}  // namespace driftscape

#endif
