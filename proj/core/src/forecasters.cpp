#include "concord/forecasters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "concord/csv.hpp"
#include "concord/errors.hpp"

namespace concord::forecast {

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::climatology: return "climatology";
    case Kind::seasonal_naive: return "seasonal_naive";
    case Kind::ar_ls: return "ar_ls";
  }
  return "unknown";
}

Kind kind_from_name(const std::string& name) {
  if (name == "climatology") return Kind::climatology;
  if (name == "seasonal_naive") return Kind::seasonal_naive;
  if (name == "ar_ls") return Kind::ar_ls;
  throw ConfigError("unknown forecaster kind: '" + name + "'");
}

void ForecasterConfig::validate() const {
  if (kind == Kind::seasonal_naive && season == 0) {
    throw ConfigError("forecaster: seasonal_naive requires season >= 1");
  }
  if (kind == Kind::ar_ls && lag_order == 0) {
    throw ConfigError("forecaster: ar_ls requires lag_order >= 1");
  }
  if (history_multiplier == 0) throw ConfigError("forecaster: history multiplier B must be >= 1");
  if (!(sigma_min > 0.0)) throw ConfigError("forecaster: sigma_min must be positive");
}

namespace {

double rms(std::span<const double> residuals) {
  if (residuals.empty()) return 0.0;
  double ss = 0.0;
  for (const double r : residuals) ss += r * r;
  return std::sqrt(ss / static_cast<double>(residuals.size()));
}

}  // namespace

Forecaster Forecaster::fit(std::span<const double> values, const ForecasterConfig& config) {
  config.validate();
  Forecaster model;
  model.config_ = config;
  const std::size_t n = values.size();

  switch (config.kind) {
    case Kind::climatology: {
      if (n < 2) throw DataError("climatology: need at least 2 observations");
      model.mean_ = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
      std::vector<double> resid(n);
      for (std::size_t t = 0; t < n; ++t) resid[t] = values[t] - model.mean_;
      model.sigma_ = rms(resid);
      break;
    }
    case Kind::seasonal_naive: {
      const std::size_t m = config.season;
      if (n < m + 1) {
        throw DataError("seasonal_naive: need at least season + 1 = " + std::to_string(m + 1) +
                        " observations, got " + std::to_string(n));
      }
      // Copy-rule residuals, bucketed by phase counted back from the end.
      std::vector<std::vector<double>> buckets(m);
      std::vector<double> all;
      all.reserve(n - m);
      for (std::size_t t = m; t < n; ++t) {
        const double r = values[t] - values[t - m];
        buckets[(n - 1 - t) % m].push_back(r);
        all.push_back(r);
      }
      model.sigma_ = rms(all);
      model.season_sigma_.resize(m);
      for (std::size_t p = 0; p < m; ++p) {
        model.season_sigma_[p] = buckets[p].size() >= 2 ? rms(buckets[p]) : model.sigma_;
      }
      break;
    }
    case Kind::ar_ls: {
      const std::size_t p = config.lag_order;
      if (n < p + 1) {
        throw DataError("ar_ls: need at least lag_order + 1 = " + std::to_string(p + 1) +
                        " observations, got " + std::to_string(n));
      }
      const std::size_t rows = n - p;
      Eigen::MatrixXd X(rows, p + 1);
      Eigen::VectorXd y(rows);
      for (std::size_t t = p; t < n; ++t) {
        const std::size_t row = t - p;
        X(row, 0) = 1.0;
        for (std::size_t i = 1; i <= p; ++i) X(row, i) = values[t - i];
        y(row) = values[t];
      }
      const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
      const Eigen::VectorXd resid = y - X * beta;
      model.coef_.assign(beta.data(), beta.data() + beta.size());
      model.sigma_ = std::sqrt(resid.squaredNorm() / static_cast<double>(rows));
      break;
    }
  }
  return model;
}

GaussianForecast Forecaster::predict(std::span<const double> history,
                                     std::size_t horizon) const {
  if (horizon == 0) throw std::invalid_argument("predict: horizon must be positive");
  GaussianForecast out;
  out.mu.resize(horizon);
  out.sigma.resize(horizon);
  const double floor = config_.sigma_min;

  switch (config_.kind) {
    case Kind::climatology: {
      std::fill(out.mu.begin(), out.mu.end(), mean_);
      std::fill(out.sigma.begin(), out.sigma.end(), std::max(sigma_, floor));
      break;
    }
    case Kind::seasonal_naive: {
      const std::size_t m = config_.season;
      if (history.size() < m) {
        throw DataError("seasonal_naive: history shorter than one season");
      }
      for (std::size_t h = 1; h <= horizon; ++h) {
        out.mu[h - 1] = history[history.size() - m + ((h - 1) % m)];
        out.sigma[h - 1] = std::max(season_sigma_[(m - h % m) % m], floor);
      }
      break;
    }
    case Kind::ar_ls: {
      const std::size_t p = config_.lag_order;
      if (history.size() < p) throw DataError("ar_ls: history shorter than lag_order");
      // h-step means via the fitted recursion (a linear map of the history).
      std::vector<double> extended(history.begin(), history.end());
      extended.reserve(history.size() + horizon);
      for (std::size_t h = 1; h <= horizon; ++h) {
        double mu = coef_[0];
        for (std::size_t i = 1; i <= p; ++i) mu += coef_[i] * extended[extended.size() - i];
        extended.push_back(mu);
        out.mu[h - 1] = mu;
      }
      // Forecast-error variance through the accumulated MA weights.
      std::vector<double> psi(horizon, 0.0);
      psi[0] = 1.0;
      for (std::size_t j = 1; j < horizon; ++j) {
        double acc = 0.0;
        for (std::size_t i = 1; i <= std::min(j, p); ++i) acc += coef_[i] * psi[j - i];
        psi[j] = acc;
      }
      const double innov_var = sigma_ * sigma_;
      double cumulative = 0.0;
      for (std::size_t h = 0; h < horizon; ++h) {
        cumulative += psi[h] * psi[h];
        const double sd = std::sqrt(innov_var * cumulative);
        if (!std::isfinite(sd)) throw NumericalError("ar_ls: forecast variance diverged");
        out.sigma[h] = std::max(sd, floor);
      }
      break;
    }
  }
  return out;
}

std::vector<LevelForecast> fit_all_levels(const series::TimeSeries& base,
                                          std::span<const Level> levels, std::size_t T,
                                          std::size_t R) {
  std::vector<LevelForecast> out;
  out.reserve(levels.size());
  for (const Level& level : levels) {
    const auto& spec = level.spec;
    if (R % spec.K != 0) {
      throw ConfigError("fit_all_levels: horizon R = " + std::to_string(R) +
                        " is not a multiple of K = " + std::to_string(spec.K) + " for level '" +
                        spec.name + "'");
    }
    const std::vector<double> aggregated = agg::aggregate_tail(base.values, spec);
    Forecaster model = Forecaster::fit(aggregated, level.config);

    const std::size_t budget = level.config.history_multiplier * T / spec.K;
    const std::size_t hist_len = std::min<std::size_t>(budget, aggregated.size());
    if (hist_len == 0) {
      throw DataError("fit_all_levels: no history available for level '" + spec.name + "'");
    }
    const std::span<const double> history(aggregated.data() + aggregated.size() - hist_len,
                                          hist_len);
    GaussianForecast forecast = model.predict(history, R / spec.K);
    forecast.level = spec.name;
    out.push_back({level, std::move(model), std::move(forecast)});
  }
  return out;
}

void write_forecasts_csv(const std::filesystem::path& path,
                         std::span<const GaussianForecast> forecasts) {
  std::ostringstream out;
  out << "level,name,j,mu,sigma\n";
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const auto& f = forecasts[i];
    for (std::size_t j = 0; j < f.horizon(); ++j) {
      out << i << ',' << f.level << ',' << (j + 1) << ',' << csv::format_double(f.mu[j]) << ','
          << csv::format_double(f.sigma[j]) << '\n';
    }
  }
  csv::write_file_atomic(path, out.str());
}

std::vector<GaussianForecast> read_forecasts_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read_file(path);
  const int level_col = table.column("level");
  const int name_col = table.column("name");
  const int j_col = table.column("j");
  const int mu_col = table.column("mu");
  const int sigma_col = table.column("sigma");
  if (level_col < 0 || name_col < 0 || j_col < 0 || mu_col < 0 || sigma_col < 0) {
    throw DataError("forecast CSV is missing one of level,name,j,mu,sigma: " + path.string());
  }

  std::vector<GaussianForecast> out;
  long current_level = -1;
  for (const auto& row : table.rows) {
    if (row.size() < 5) throw DataError("forecast CSV: short row in " + path.string());
    double level_raw = 0.0, j_raw = 0.0, mu = 0.0, sigma = 0.0;
    if (!csv::parse_double(row[level_col], level_raw) || !csv::parse_double(row[j_col], j_raw) ||
        !csv::parse_double(row[mu_col], mu) || !csv::parse_double(row[sigma_col], sigma)) {
      throw DataError("forecast CSV: non-numeric cell in " + path.string());
    }
    const long level = static_cast<long>(level_raw);
    if (level == current_level + 1) {
      out.emplace_back();
      out.back().level = row[name_col];
      current_level = level;
    } else if (level != current_level) {
      throw DataError("forecast CSV: level indices must be consecutive in " + path.string());
    }
    if (static_cast<std::size_t>(j_raw) != out.back().mu.size() + 1) {
      throw DataError("forecast CSV: step indices must run 1..H per level in " + path.string());
    }
    if (!(sigma > 0.0)) throw DataError("forecast CSV: sigma must be positive in " + path.string());
    out.back().mu.push_back(mu);
    out.back().sigma.push_back(sigma);
  }
  return out;
}

}  // namespace concord::forecast
