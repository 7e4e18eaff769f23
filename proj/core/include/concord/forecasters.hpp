#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "concord/aggregates.hpp"
#include "concord/series.hpp"

namespace concord::forecast {

/**
 * @brief A per-step Gaussian forecast for one level.
 *
 * Element h (0-based) describes step h+1 after the forecast origin, in the
 * level's own time scale. Sigmas are always strictly positive.
 */
struct GaussianForecast {
  std::string level;
  std::vector<double> mu;
  std::vector<double> sigma;

  std::size_t horizon() const { return mu.size(); }
};

/// Available forecaster families. All are non-autoregressive at predict
/// time: the full horizon distribution is a pure function of the history
/// window, with no feedback of sampled outputs.
enum class Kind { climatology, seasonal_naive, ar_ls };

const char* kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

struct ForecasterConfig {
  Kind kind = Kind::climatology;
  std::size_t season = 1;      ///< m, seasonal_naive only
  std::size_t lag_order = 1;   ///< p, ar_ls only
  std::size_t history_multiplier = 2;  ///< B: level history budget is B*T/K
  double sigma_min = 1e-6;     ///< floor applied to every emitted sigma

  void validate() const;
};

/**
 * @brief A fitted forecaster. Immutable after fit; predict is pure.
 *
 * - climatology: constant mean and spread of the fitted segment.
 * - seasonal_naive: lag-m copy of the history with a per-season residual
 *   spread estimated on the fitted segment (pooled fallback for seasons
 *   with fewer than two residuals).
 * - ar_ls: least-squares AR(p) with intercept. Means follow the h-step
 *   recursion; variances grow with the accumulated moving-average weights
 *   of the fitted polynomial.
 *
 * Every sigma estimate maximizes the Gaussian log-likelihood of the fit
 * residuals (RMS, no degrees-of-freedom correction) and is floored at
 * sigma_min on output.
 */
class Forecaster {
 public:
  static Forecaster fit(std::span<const double> values, const ForecasterConfig& config);

  /// Forecast `horizon` steps past the end of `history`. The history must
  /// be long enough for the family (>= season for seasonal_naive, >= p for
  /// ar_ls; climatology ignores it).
  GaussianForecast predict(std::span<const double> history, std::size_t horizon) const;

  Kind kind() const { return config_.kind; }
  const ForecasterConfig& config() const { return config_; }

  /// Pooled residual RMS (climatology spread / seasonal pooled spread /
  /// AR innovation scale), before the sigma_min floor.
  double residual_std() const { return sigma_; }

  /// ar_ls only: fitted [intercept, phi_1, ..., phi_p].
  const std::vector<double>& coefficients() const { return coef_; }

  /// seasonal_naive only: spread per season phase, keyed by distance from
  /// the end of the fitted segment.
  const std::vector<double>& season_residual_std() const { return season_sigma_; }

  double fitted_mean() const { return mean_; }

 private:
  ForecasterConfig config_;
  double mean_ = 0.0;
  double sigma_ = 0.0;
  std::vector<double> season_sigma_;
  std::vector<double> coef_;
};

/// One consensus level: what to aggregate, how to forecast it, and its
/// weight in the consensus objective.
struct Level {
  agg::AggregateSpec spec;
  ForecasterConfig config;
  double alpha = 1.0;
};

struct LevelForecast {
  Level level;
  Forecaster model;
  GaussianForecast forecast;
};

/**
 * @brief Fit every level on its own aggregation of `base` and forecast one
 * horizon from the series tail.
 *
 * Level i sees the trailing min(B*T/K_i, available) aggregated windows as
 * history (windows anchored at the series end so horizon windows continue
 * the phase) and forecasts R/K_i steps. Requires R % K_i == 0 for all i.
 */
std::vector<LevelForecast> fit_all_levels(const series::TimeSeries& base,
                                          std::span<const Level> levels, std::size_t T,
                                          std::size_t R);

/// Write forecasts as CSV with columns level,name,j,mu,sigma (level =
/// position in `forecasts`, j = 1-based step). Atomic.
void write_forecasts_csv(const std::filesystem::path& path,
                         std::span<const GaussianForecast> forecasts);

/// Inverse of write_forecasts_csv; validates ordering and positive sigmas.
std::vector<GaussianForecast> read_forecasts_csv(const std::filesystem::path& path);

}  // namespace concord::forecast
