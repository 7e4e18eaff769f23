#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "concord/aggregates.hpp"
#include "concord/forecasters.hpp"

namespace concord::consensus {

/**
 * @brief One calibration target: the forecast for window j of some level,
 * expressed against the base horizon.
 *
 * The consensus distribution should make the implied Gaussian for the
 * linear statistic `weight` agree with N(target_mean, target_std^2);
 * `alpha` scales how strongly this entry pulls on the objective.
 */
struct Entry {
  agg::PaddedWeight weight;
  double target_mean = 0.0;
  double target_std = 1.0;
  double alpha = 1.0;
  std::string level;
  std::size_t window_j = 1;
};

/// One level's forecast ready for consensus, in the base data space.
struct LevelForecastInput {
  agg::AggregateSpec spec;
  forecast::GaussianForecast forecast;  ///< horizon R / spec.K
  double alpha = 1.0;
};

/**
 * @brief The full consensus problem over a base horizon of length R.
 *
 * Valid problems have positive alphas and target spreads, weights that
 * match R, and entry supports that jointly cover every horizon index.
 */
struct Problem {
  std::size_t R = 0;
  std::size_t rank = 0;  ///< k, number of dense covariance factors
  std::vector<Entry> entries;

  void validate() const;
};

/// Expand per-level forecasts into per-window entries (one per tile) and
/// validate. Throws ConfigError/DataError on contract violations.
Problem build_problem(std::span<const LevelForecastInput> levels, std::size_t R,
                      std::size_t rank);

/// Settings for the covariance descent.
struct OptimizerConfig {
  std::size_t max_iterations = 10000;
  double tolerance = 1e-7;      ///< stop when the gradient max-norm falls below
  double initial_step = 0.1;
  double log_coeff = 0.5;       ///< coefficient of -log s in the objective
  double init_v_scale = 1e-2;   ///< factor entries start i.i.d. uniform in +-this
  std::uint64_t seed = 0;
  bool record_trace = false;    ///< keep the per-iteration objective values
};

struct Diagnostics {
  double objective = 0.0;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  std::vector<double> trace;  ///< accepted objective values, when recorded
};

/**
 * @brief The consensus output: a multivariate Gaussian over the base
 * horizon with covariance Diag(sigma^2) + V V^T.
 *
 * The structured covariance keeps marginalization of any linear statistic
 * at O(R k) while still expressing the cross-step correlation implied by
 * the aggregate-level spreads. `support_blocks` records which contiguous
 * index blocks ever appeared together in one calibration entry; a query
 * spanning indices no single block covers is answered but flagged, since
 * nothing constrained those cross terms.
 */
struct ConsensusDistribution {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;  ///< per-step stds (the diagonal part)
  Eigen::MatrixXd V;      ///< R x k
  Diagnostics diagnostics;
  std::vector<std::pair<std::size_t, std::size_t>> support_blocks;  ///< (offset, length)

  // Provenance of the forecast window inside a rolling run; negative when
  // the distribution was not produced by the pipeline.
  long window_index = -1;
  long target_begin = -1;

  std::size_t R() const { return static_cast<std::size_t>(mu.size()); }
  std::size_t rank() const { return static_cast<std::size_t>(V.cols()); }
};

/**
 * @brief Exact consensus mean.
 *
 * The mean part of the objective is the weighted least squares
 *   sum_e alpha_e (a_e . mu - m_e)^2 / s_e^2,
 * solved through its normal equations M mu = b with
 * M = sum alpha a a^T / s^2 and b = sum alpha m a / s^2, followed by
 * iterative refinement until the relative residual is at rounding level.
 * Throws NumericalError when M is singular (with the degenerate indices)
 * or too ill-conditioned to refine.
 */
Eigen::VectorXd solve_mean(const Problem& problem);

/**
 * @brief Fit the structured covariance by gradient descent.
 *
 * Minimizes sum_e alpha_e [ s_e / (2 t_e^2) - log_coeff * log s_e ] over
 * (rho, V), where s_e = a_e^T (Diag(e^{2 rho}) + V V^T) a_e is the implied
 * variance for entry e and t_e its target spread. With log_coeff = 1/2
 * (the exact Gaussian relative-entropy weight) a single consistent target
 * is reproduced exactly; stationary spreads then satisfy s_e = t_e^2.
 * The step size halves whenever a step would increase the objective and
 * grows by 1.1 after every accepted step, so the recorded objective trace
 * is non-increasing. V starts at small uniform noise: V = 0 is a saddle
 * point whenever negative cross-step correlation is required.
 *
 * Returns per-step stds and V; non-convergence within the iteration
 * budget is reported through diagnostics, never thrown.
 */
std::pair<Eigen::VectorXd, Eigen::MatrixXd> solve_covariance(const Problem& problem,
                                                             const OptimizerConfig& config,
                                                             Diagnostics* diagnostics = nullptr);

/// solve_mean + solve_covariance in one call.
ConsensusDistribution reconcile(const Problem& problem, const OptimizerConfig& config = {});
ConsensusDistribution reconcile(std::span<const LevelForecastInput> levels, std::size_t R,
                                std::size_t rank, const OptimizerConfig& config = {});

struct QueryResult {
  double mean = 0.0;
  double variance = 0.0;
  bool jointly_constrained = true;
};

/**
 * @brief Closed-form marginal of a linear statistic under the consensus.
 *
 * mean = a . mu, variance = sum_t a_t^2 sigma_t^2 + |V^T a|^2; O(R k),
 * no dense covariance is ever formed. Any weight vector over the horizon
 * is admissible, including statistics never seen during calibration.
 */
QueryResult marginalize(const ConsensusDistribution& dist, const agg::PaddedWeight& weight);
QueryResult marginalize(const ConsensusDistribution& dist, std::span<const double> weight);

/// Materialize Diag(sigma^2) + V V^T. Diagnostic only; guarded to R <= 4096.
Eigen::MatrixXd dense_covariance(const ConsensusDistribution& dist);

/// JSON round-trip: {R, k, mu, sigma, V, diagnostics, support_blocks[, window]}.
std::string to_json(const ConsensusDistribution& dist);
ConsensusDistribution from_json(const std::string& json_text);

}  // namespace concord::consensus
