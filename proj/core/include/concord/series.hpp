#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace concord::series {

/**
 * @brief A univariate series with optional exogenous features and labels.
 *
 * `values` is the target. `features`, when present, holds one row per
 * observation. `timestamps` are opaque labels carried through unchanged;
 * no calendar arithmetic is ever performed on them.
 */
struct TimeSeries {
  std::vector<double> values;
  std::vector<std::vector<double>> features;
  std::vector<std::string> timestamps;

  std::size_t size() const { return values.size(); }
  std::size_t feature_dim() const { return features.empty() ? 0 : features.front().size(); }
};

enum class MissingPolicy { reject, forward_fill };

/// Column selection and missing-value handling for CSV ingestion.
struct CsvSpec {
  std::string value_column;
  std::vector<std::string> feature_columns;
  std::string timestamp_column;  // empty = none
  MissingPolicy policy = MissingPolicy::reject;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;
  std::size_t rows_filled = 0;
};

/**
 * @brief Load a series from a headered CSV file.
 *
 * A row is "missing" when the value cell or any requested feature cell is
 * empty or not a finite number. Under `reject` such rows are dropped and
 * counted; under `forward_fill` the previous accepted row is repeated
 * (rows before the first accepted one are still dropped). Throws DataError
 * for unreadable files or absent columns.
 */
TimeSeries ingest_csv(const std::filesystem::path& path, const CsvSpec& spec,
                      IngestReport* report = nullptr);

/// Half-open index range [begin, end) into a parent series.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/**
 * @brief Contiguous train/validation/test split for backtesting.
 *
 * The lengths must sum to the series length. The validation and test
 * segments each start `T` observations early so that the first forecast
 * origin inside them has a full history; consecutive segments therefore
 * overlap by exactly `T`, while the forecast-target regions stay disjoint.
 */
struct SplitSpec {
  std::size_t l_trn = 0;
  std::size_t l_val = 0;
  std::size_t l_test = 0;
  std::size_t T = 0;  ///< history (context) length at the base level
  std::size_t R = 0;  ///< forecast horizon at the base level

  /// Validates internal consistency against a series of length `n`.
  /// Throws ConfigError (bad T/R) or DataError (lengths vs n).
  void validate(std::size_t n) const;
};

struct Splits {
  Segment train;
  Segment val;
  Segment test;
};

Splits split(const TimeSeries& series, const SplitSpec& spec);

/// A training chunk: `history` of length T directly followed by `target`
/// of length R, both copied out of the train segment.
struct Chunk {
  std::size_t start = 0;  // 0-based offset of the first history element
  std::vector<double> history;
  std::vector<double> target;
};

/**
 * @brief Sample one training chunk uniformly over all admissible offsets.
 *
 * The offset ranges over [0, l_trn - T - R] so history and target always
 * fit inside the train segment. Reproducible: the same engine state yields
 * the same chunk sequence.
 */
Chunk sample_chunk(std::span<const double> train, std::size_t T, std::size_t R,
                   std::mt19937_64& rng);

/**
 * @brief Affine normalizer fitted on the train segment.
 *
 * Uses the population standard deviation. A spread below `kFloor` is
 * clamped (and flagged) so that normalization never divides by zero.
 */
struct Normalizer {
  double mean = 0.0;
  double stddev = 1.0;
  bool floored = false;

  static constexpr double kFloor = 1e-8;

  static Normalizer fit(std::span<const double> values);

  double apply(double y) const { return (y - mean) / stddev; }
  std::vector<double> apply(std::span<const double> values) const;

  double invert(double z) const { return z * stddev + mean; }

  /// Push a Gaussian through the inverse map: N(mu, var) -> N(mu*s + m, var*s^2).
  void invert_gaussian(double mu, double var, double& mu_out, double& var_out) const;
};

/// Forecast origin layout for rolling evaluation, relative to a segment:
/// history occupies [history_begin, history_begin + T), the target
/// [target_begin, target_begin + R).
struct RollingWindow {
  std::size_t history_begin = 0;
  std::size_t target_begin = 0;
};

/**
 * @brief Enumerate rolling forecast windows over a segment of length `len`.
 *
 * Windows start at offsets 0, stride, 2*stride, ... while history plus
 * target still fit. Targets are disjoint when stride >= R; the default
 * stride used by the pipeline is R.
 */
std::vector<RollingWindow> rolling_windows(std::size_t len, std::size_t T, std::size_t R,
                                           std::size_t stride);

}  // namespace concord::series
