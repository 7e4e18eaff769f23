#include "concord/series.hpp"

#include <cmath>
#include <numeric>

#include "concord/csv.hpp"
#include "concord/errors.hpp"

namespace concord::series {

TimeSeries ingest_csv(const std::filesystem::path& path, const CsvSpec& spec,
                      IngestReport* report) {
  const csv::Table table = csv::read_file(path);

  const int value_col = table.column(spec.value_column);
  if (value_col < 0) {
    throw DataError("value column '" + spec.value_column + "' not found in " + path.string());
  }
  std::vector<int> feature_cols;
  feature_cols.reserve(spec.feature_columns.size());
  for (const auto& name : spec.feature_columns) {
    const int col = table.column(name);
    if (col < 0) throw DataError("feature column '" + name + "' not found in " + path.string());
    feature_cols.push_back(col);
  }
  int ts_col = -1;
  if (!spec.timestamp_column.empty()) {
    ts_col = table.column(spec.timestamp_column);
    if (ts_col < 0) {
      throw DataError("timestamp column '" + spec.timestamp_column + "' not found in " +
                      path.string());
    }
  }

  TimeSeries out;
  IngestReport stats;
  const bool fill = spec.policy == MissingPolicy::forward_fill;
  bool have_previous = false;
  double prev_value = 0.0;
  std::vector<double> prev_features(feature_cols.size(), 0.0);

  auto cell_at = [](const std::vector<std::string>& row, int col) -> const std::string& {
    static const std::string empty;
    return col < static_cast<int>(row.size()) ? row[static_cast<std::size_t>(col)] : empty;
  };

  for (const auto& row : table.rows) {
    ++stats.rows_read;
    double value = 0.0;
    std::vector<double> feats(feature_cols.size(), 0.0);
    bool ok = csv::parse_double(cell_at(row, value_col), value);
    for (std::size_t f = 0; ok && f < feature_cols.size(); ++f) {
      ok = csv::parse_double(cell_at(row, feature_cols[f]), feats[f]);
    }

    if (!ok) {
      if (fill && have_previous) {
        value = prev_value;
        feats = prev_features;
        ++stats.rows_filled;
      } else {
        ++stats.rows_rejected;
        continue;
      }
    }

    prev_value = value;
    prev_features = feats;
    have_previous = true;

    out.values.push_back(value);
    if (!feature_cols.empty()) out.features.push_back(std::move(feats));
    if (ts_col >= 0) out.timestamps.push_back(cell_at(row, ts_col));
  }

  if (out.values.empty()) throw DataError("no usable rows in " + path.string());
  if (report != nullptr) *report = stats;
  return out;
}

void SplitSpec::validate(std::size_t n) const {
  if (T == 0 || R == 0) throw ConfigError("split: T and R must be positive");
  if (l_trn < T + R) {
    throw ConfigError("split: l_trn must be at least T + R so at least one training chunk fits");
  }
  if (l_trn + l_val + l_test != n) {
    throw DataError("split: l_trn + l_val + l_test = " +
                    std::to_string(l_trn + l_val + l_test) + " does not match series length " +
                    std::to_string(n));
  }
}

Splits split(const TimeSeries& series, const SplitSpec& spec) {
  spec.validate(series.size());
  Splits s;
  s.train = {0, spec.l_trn};
  s.val = {spec.l_trn - spec.T, spec.l_trn + spec.l_val};
  s.test = {spec.l_trn + spec.l_val - spec.T, series.size()};
  return s;
}

Chunk sample_chunk(std::span<const double> train, std::size_t T, std::size_t R,
                   std::mt19937_64& rng) {
  if (T == 0 || R == 0) throw ConfigError("sample_chunk: T and R must be positive");
  if (train.size() < T + R) throw DataError("sample_chunk: train segment shorter than T + R");
  std::uniform_int_distribution<std::size_t> offset(0, train.size() - T - R);
  Chunk chunk;
  chunk.start = offset(rng);
  chunk.history.assign(train.begin() + chunk.start, train.begin() + chunk.start + T);
  chunk.target.assign(train.begin() + chunk.start + T, train.begin() + chunk.start + T + R);
  return chunk;
}

Normalizer Normalizer::fit(std::span<const double> values) {
  if (values.empty()) throw DataError("normalizer: cannot fit on an empty segment");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  Normalizer norm;
  norm.mean = mean;
  norm.stddev = std::sqrt(ss / n);
  if (norm.stddev < kFloor) {
    norm.stddev = kFloor;
    norm.floored = true;
  }
  return norm;
}

std::vector<double> Normalizer::apply(std::span<const double> values) const {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = apply(values[i]);
  return out;
}

void Normalizer::invert_gaussian(double mu, double var, double& mu_out, double& var_out) const {
  mu_out = mu * stddev + mean;
  var_out = var * stddev * stddev;
}

std::vector<RollingWindow> rolling_windows(std::size_t len, std::size_t T, std::size_t R,
                                           std::size_t stride) {
  if (T == 0 || R == 0) throw ConfigError("rolling_windows: T and R must be positive");
  if (stride == 0) throw ConfigError("rolling_windows: stride must be positive");
  std::vector<RollingWindow> windows;
  for (std::size_t s = 0; s + T + R <= len; s += stride) {
    windows.push_back({s, s + T});
  }
  return windows;
}

}  // namespace concord::series
