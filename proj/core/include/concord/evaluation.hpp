#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "concord/aggregates.hpp"
#include "concord/consensus.hpp"
#include "concord/forecasters.hpp"

namespace concord::eval {

/**
 * @brief Closed-form CRPS of a Gaussian forecast N(mu, sigma^2) against
 * observation y:
 *   sigma * [ z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi) ],  z = (y - mu)/sigma.
 * Strictly proper; requires sigma > 0.
 */
double crps_gaussian(double mu, double sigma, double y);

/**
 * @brief CRPS via the quantile decomposition,
 *   integral over alpha in (0,1) of 2 (alpha - 1[y < q]) (y - q),
 *   q = inv_cdf(alpha),
 * midpoint rule on `grid` cells (>= 100). Independent of the closed form;
 * works for any continuous forecast distribution given its quantiles.
 */
double crps_quadrature(const std::function<double(double)>& inv_cdf, double y,
                       std::size_t grid = 10000);

/// One scored (level, K) combination. Values are means over horizon
/// windows first, then over forecast windows, unweighted.
struct ScoreRow {
  std::string level;
  std::size_t K = 1;
  double crps = 0.0;
  double mae = 0.0;
  std::size_t n_windows = 0;
};

/**
 * @brief Scores for a set of query statistics.
 *
 * `runtime_seconds` is informational only and is never serialized, so
 * emitted artifacts stay byte-identical across reruns.
 */
struct ScoreReport {
  std::vector<ScoreRow> rows;
  double runtime_seconds = 0.0;

  /// CSV rows level,K,metric,value,n_windows (one row per metric).
  std::string to_csv() const;
  std::string to_json() const;
};

/**
 * @brief Score consensus distributions on arbitrary aggregate statistics.
 *
 * For each spec: tile the horizon, marginalize each window, score the
 * closed-form Gaussian CRPS and absolute error against the aggregated
 * truth. `truths` holds the true base-level target of each forecast
 * window. Specs whose K does not divide the horizon are rejected.
 */
ScoreReport evaluate_consensus(std::span<const consensus::ConsensusDistribution> windows,
                               std::span<const std::vector<double>> truths,
                               std::span<const agg::AggregateSpec> specs);

/**
 * @brief Independence baseline: aggregate the per-step base forecasts as
 * if steps were uncorrelated (mean a . mu, variance sum a_t^2 sigma_t^2).
 */
ScoreReport evaluate_baseline(std::span<const forecast::GaussianForecast> base_forecasts,
                              std::span<const std::vector<double>> truths,
                              std::span<const agg::AggregateSpec> specs);

/// Minimal self-contained SVG line chart for one forecast window: truth,
/// consensus mean and a +-2 sigma band of the per-step marginals. Atomic.
void write_window_svg(const std::filesystem::path& path, std::span<const double> truth,
                      std::span<const double> mu, std::span<const double> sigma);

}  // namespace concord::eval
