#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "concord/series.hpp"

namespace concord::agg {

/// Built-in linear window statistics plus fully custom weights.
enum class Kind { base, average, trend, halfdiff, custom };

const char* kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

/**
 * @brief A linear statistic over disjoint windows of K consecutive steps.
 *
 * Window j (1-based) of a series y is z_j = sum_r weights[r] * y[(j-1)K + r].
 * The built-in kinds:
 *  - base:     K = 1, weights [1]; the identity level.
 *  - average:  weights 1/K.
 *  - trend:    weights (2r - K - 1) / (2K), a centered linear ramp; responds
 *              to the within-window slope and ignores the window level.
 *  - halfdiff: -2/K on the first half, +2/K on the second; the difference
 *              of half-window means.
 */
struct AggregateSpec {
  std::string name;
  Kind kind = Kind::base;
  std::size_t K = 1;
  std::vector<double> weights;

  double weight_sum() const;
};

/**
 * @brief Construct and validate a spec.
 *
 * Rules: base requires K = 1; trend requires K >= 2; halfdiff requires an
 * even K >= 2; custom requires exactly K weights, not all zero. A default
 * name like "average6" is derived when none is given.
 */
AggregateSpec make_spec(Kind kind, std::size_t K,
                        std::optional<std::vector<double>> custom_weights = std::nullopt,
                        std::optional<std::string> name = std::nullopt);

/// JSON round-trip of a spec: {"name", "kind", "K", "weights"}.
std::string spec_to_json(const AggregateSpec& spec);
AggregateSpec spec_from_json(const std::string& json_text);

/// The aggregated series together with its provenance. Features are
/// carried as per-window means. `dropped` counts the trailing remainder
/// observations that did not fill a window.
struct AggregateSeries {
  AggregateSpec spec;
  std::vector<double> values;
  std::vector<std::vector<double>> features;
  std::size_t dropped = 0;
};

/// Apply `spec` to a full series, windows anchored at the first element,
/// trailing remainder dropped. Summation is left to right, so results are
/// bit-reproducible. Throws DataError when fewer than K values exist.
AggregateSeries aggregate_series(const series::TimeSeries& input, const AggregateSpec& spec);

/// Same, on a bare value span.
std::vector<double> aggregate_values(std::span<const double> values, const AggregateSpec& spec);

/**
 * @brief Aggregate the tail of `values` with windows anchored at the END.
 *
 * Used to build level histories at a forecast origin: the last window ends
 * exactly at the origin so horizon windows continue the same phase. At most
 * `max_windows` windows are produced (0 = as many as fit); the leading
 * remainder is dropped.
 */
std::vector<double> aggregate_tail(std::span<const double> values, const AggregateSpec& spec,
                                   std::size_t max_windows = 0);

/**
 * @brief A window weight vector embedded into a base-level horizon of
 * length R: zero outside [offset, offset + K).
 *
 * Stored in compressed form; `dense()` materializes the full R-vector.
 * The nonzero support is exactly the contiguous block of window j.
 */
struct PaddedWeight {
  std::size_t horizon = 0;  ///< R
  std::size_t offset = 0;   ///< 0-based start of the window block
  std::vector<double> window;

  std::size_t K() const { return window.size(); }
  std::vector<double> dense() const;

  /// Inner product with a base-horizon vector of length `horizon`,
  /// summed left to right over the support.
  double dot(std::span<const double> horizon_values) const;
};

/// Embed window j (1-based) of `spec` into horizon R. Requires j*K <= R.
PaddedWeight pad_weight(const AggregateSpec& spec, std::size_t j, std::size_t R);

/// All R/K windows of `spec` across horizon R. Requires R % K == 0.
std::vector<PaddedWeight> tile_horizon(const AggregateSpec& spec, std::size_t R);

}  // namespace concord::agg
