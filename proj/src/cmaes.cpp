#include "driftscape/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

namespace driftscape {

CmaesResult cmaes_maximize(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& x0, const CmaesOptions& opts, Rng& rng) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = static_cast<int>(x0.size());
  const int lambda =
      opts.population > 0
          ? opts.population
          : 4 + static_cast<int>(std::floor(3.0 * std::log(double(n))));
  const int mu = lambda / 2;

  VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) {
    weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  }
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) +
      c_sigma;
  const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  const double c_mu =
      std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                              ((n + 2.0) * (n + 2.0) + mu_eff));
  const double chi_n =
      std::sqrt(double(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  VectorXd scales = opts.scales.size() == n
                        ? opts.scales
                        : VectorXd::Ones(n);
  VectorXd mean = x0;
  double sigma = opts.sigma0;
  MatrixXd cov = scales.array().square().matrix().asDiagonal();
  MatrixXd basis = MatrixXd::Identity(n, n);
  VectorXd axes = scales;
  VectorXd p_sigma = VectorXd::Zero(n);
  VectorXd p_c = VectorXd::Zero(n);

  CmaesResult result;
  result.best = x0;
  {
    double f0 = objective(x0);
    if (std::isnan(f0)) f0 = -std::numeric_limits<double>::infinity();
    result.value = f0;
    result.evaluations = 1;
  }

  std::vector<VectorXd> zs(lambda), ys(lambda), xs(lambda);
  std::vector<double> fs(lambda);
  // Stagnation rule: compare the best generation value of the last window
  // against the window before it. Comparing against the overall best would
  // stall warm starts whose x0 the sampler needs many generations to beat.
  std::deque<double> gen_best_history;
  const std::size_t half_window = 30;

  long gen = 0;
  while (result.evaluations < opts.max_evals) {
    ++gen;
    for (int i = 0; i < lambda; ++i) {
      VectorXd z(n);
      for (int d = 0; d < n; ++d) z(d) = rng.gauss();
      zs[i] = z;
      ys[i] = basis * (axes.array() * z.array()).matrix();
      xs[i] = mean + sigma * ys[i];
      double f = objective(xs[i]);
      if (std::isnan(f)) f = -std::numeric_limits<double>::infinity();
      fs[i] = f;
      ++result.evaluations;
      if (f > result.value) {
        result.value = f;
        result.best = xs[i];
      }
      if (result.evaluations >= opts.max_evals) break;
    }
    if (result.evaluations >= opts.max_evals) {
      result.budget_exhausted = true;
      break;
    }

    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (fs[a] != fs[b]) return fs[a] > fs[b];
      return a < b;
    });

    int finite_selected = 0;
    for (int i = 0; i < mu; ++i) {
      if (std::isfinite(fs[order[i]])) ++finite_selected;
    }
    if (finite_selected < 2) continue;  // no usable ranking this generation

    VectorXd y_w = VectorXd::Zero(n);
    VectorXd z_w = VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) {
      y_w += weights(i) * ys[order[i]];
      z_w += weights(i) * zs[order[i]];
    }
    mean += sigma * y_w;

    p_sigma = (1.0 - c_sigma) * p_sigma +
              std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * (basis * z_w);
    const double expected_decay =
        1.0 - std::pow(1.0 - c_sigma, 2.0 * double(gen));
    const bool h_sigma =
        p_sigma.norm() / std::sqrt(expected_decay) <
        (1.4 + 2.0 / (n + 1.0)) * chi_n;
    p_c = (1.0 - c_c) * p_c;
    if (h_sigma) p_c += std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      rank_mu += weights(i) * ys[order[i]] * ys[order[i]].transpose();
    }
    const double c1_correction = h_sigma ? 0.0 : c_c * (2.0 - c_c);
    cov = (1.0 - c_1 - c_mu) * cov +
          c_1 * (p_c * p_c.transpose() + c1_correction * cov) +
          c_mu * rank_mu;
    cov = 0.5 * (cov + cov.transpose());

    sigma *= std::exp((c_sigma / d_sigma) * (p_sigma.norm() / chi_n - 1.0));
    if (!std::isfinite(sigma) || !cov.allFinite()) break;

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) break;
    basis = eig.eigenvectors();
    axes = eig.eigenvalues().cwiseMax(1e-24).cwiseSqrt();

    if (sigma * axes.maxCoeff() < 1e-13) break;

    gen_best_history.push_back(fs[order[0]]);
    if (gen_best_history.size() > 2 * half_window) {
      gen_best_history.pop_front();
    }
    if (gen_best_history.size() == 2 * half_window) {
      // window medians: robust against single lucky samples during the
      // exploration phase
      std::vector<double> old_half(gen_best_history.begin(),
                                   gen_best_history.begin() + half_window);
      std::vector<double> new_half(gen_best_history.begin() + half_window,
                                   gen_best_history.end());
      std::nth_element(old_half.begin(), old_half.begin() + half_window / 2,
                       old_half.end());
      std::nth_element(new_half.begin(), new_half.begin() + half_window / 2,
                       new_half.end());
      const double old_med = old_half[half_window / 2];
      const double new_med = new_half[half_window / 2];
      if (std::isfinite(old_med) && new_med - old_med < opts.tolerance) {
        break;
      }
    }
  }
  return result;
}

}  // namespace driftscape
