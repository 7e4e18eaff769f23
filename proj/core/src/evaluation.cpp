#include "concord/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "concord/csv.hpp"
#include "concord/errors.hpp"
#include "concord/normal.hpp"

namespace concord::eval {

namespace {
constexpr double kInvSqrtPi = 0.5641895835477562869480795;
}

double crps_gaussian(double mu, double sigma, double y) {
  if (!(sigma > 0.0)) throw std::invalid_argument("crps_gaussian: sigma must be positive");
  const double z = (y - mu) / sigma;
  return sigma * (z * (2.0 * normal::cdf(z) - 1.0) + 2.0 * normal::pdf(z) - kInvSqrtPi);
}

double crps_quadrature(const std::function<double(double)>& inv_cdf, double y,
                       std::size_t grid) {
  if (grid < 100) throw std::invalid_argument("crps_quadrature: grid must be at least 100");
  const double h = 1.0 / static_cast<double>(grid);
  double acc = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double alpha = (static_cast<double>(i) + 0.5) * h;
    const double q = inv_cdf(alpha);
    const double indicator = y < q ? 1.0 : 0.0;
    acc += 2.0 * (alpha - indicator) * (y - q);
  }
  return acc * h;
}

namespace {

struct Accumulator {
  double crps_sum = 0.0;
  double mae_sum = 0.0;
  std::size_t windows = 0;
};

void validate_truths(std::span<const std::vector<double>> truths, std::size_t count,
                     std::size_t R) {
  if (truths.size() != count) {
    throw DataError("evaluate: " + std::to_string(count) + " forecast windows but " +
                    std::to_string(truths.size()) + " truth windows");
  }
  for (const auto& t : truths) {
    if (t.size() != R) throw DataError("evaluate: truth window length does not match horizon");
  }
}

ScoreRow finish_row(const agg::AggregateSpec& spec, const Accumulator& acc) {
  ScoreRow row;
  row.level = spec.name;
  row.K = spec.K;
  row.n_windows = acc.windows;
  row.crps = acc.crps_sum / static_cast<double>(acc.windows);
  row.mae = acc.mae_sum / static_cast<double>(acc.windows);
  return row;
}

}  // namespace

ScoreReport evaluate_consensus(std::span<const consensus::ConsensusDistribution> windows,
                               std::span<const std::vector<double>> truths,
                               std::span<const agg::AggregateSpec> specs) {
  if (windows.empty()) throw DataError("evaluate_consensus: no forecast windows");
  const std::size_t R = windows.front().R();
  for (const auto& w : windows) {
    if (w.R() != R) throw DataError("evaluate_consensus: mixed horizons across windows");
  }
  validate_truths(truths, windows.size(), R);

  ScoreReport report;
  for (const auto& spec : specs) {
    const auto tiles = agg::tile_horizon(spec, R);
    Accumulator acc;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const auto truth = agg::aggregate_values(truths[w], spec);
      double crps = 0.0;
      double mae = 0.0;
      for (std::size_t j = 0; j < tiles.size(); ++j) {
        const auto q = consensus::marginalize(windows[w], tiles[j]);
        const double sd = std::sqrt(std::max(q.variance, 1e-24));
        crps += crps_gaussian(q.mean, sd, truth[j]);
        mae += std::abs(q.mean - truth[j]);
      }
      acc.crps_sum += crps / static_cast<double>(tiles.size());
      acc.mae_sum += mae / static_cast<double>(tiles.size());
      ++acc.windows;
    }
    report.rows.push_back(finish_row(spec, acc));
  }
  return report;
}

ScoreReport evaluate_baseline(std::span<const forecast::GaussianForecast> base_forecasts,
                              std::span<const std::vector<double>> truths,
                              std::span<const agg::AggregateSpec> specs) {
  if (base_forecasts.empty()) throw DataError("evaluate_baseline: no forecast windows");
  const std::size_t R = base_forecasts.front().horizon();
  for (const auto& f : base_forecasts) {
    if (f.horizon() != R) throw DataError("evaluate_baseline: mixed horizons across windows");
  }
  validate_truths(truths, base_forecasts.size(), R);

  ScoreReport report;
  for (const auto& spec : specs) {
    const auto tiles = agg::tile_horizon(spec, R);
    Accumulator acc;
    for (std::size_t w = 0; w < base_forecasts.size(); ++w) {
      const auto& f = base_forecasts[w];
      const auto truth = agg::aggregate_values(truths[w], spec);
      double crps = 0.0;
      double mae = 0.0;
      for (std::size_t j = 0; j < tiles.size(); ++j) {
        const auto& tile = tiles[j];
        double mean = 0.0;
        double var = 0.0;
        for (std::size_t r = 0; r < tile.K(); ++r) {
          const std::size_t t = tile.offset + r;
          const double a = tile.window[r];
          mean += a * f.mu[t];
          var += a * a * f.sigma[t] * f.sigma[t];
        }
        const double sd = std::sqrt(std::max(var, 1e-24));
        crps += crps_gaussian(mean, sd, truth[j]);
        mae += std::abs(mean - truth[j]);
      }
      acc.crps_sum += crps / static_cast<double>(tiles.size());
      acc.mae_sum += mae / static_cast<double>(tiles.size());
      ++acc.windows;
    }
    report.rows.push_back(finish_row(spec, acc));
  }
  return report;
}

std::string ScoreReport::to_csv() const {
  std::ostringstream out;
  out << "level,K,metric,value,n_windows\n";
  for (const auto& row : rows) {
    out << row.level << ',' << row.K << ",crps," << csv::format_double(row.crps) << ','
        << row.n_windows << '\n';
    out << row.level << ',' << row.K << ",mae," << csv::format_double(row.mae) << ','
        << row.n_windows << '\n';
  }
  return out.str();
}

std::string ScoreReport::to_json() const {
  nlohmann::json j;
  auto arr = nlohmann::json::array();
  for (const auto& row : rows) {
    arr.push_back({{"level", row.level},
                   {"K", row.K},
                   {"crps", row.crps},
                   {"mae", row.mae},
                   {"n_windows", row.n_windows}});
  }
  j["scores"] = std::move(arr);
  return j.dump(2);
}

namespace {

std::string svg_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void write_window_svg(const std::filesystem::path& path, std::span<const double> truth,
                      std::span<const double> mu, std::span<const double> sigma) {
  const std::size_t n = truth.size();
  if (n == 0 || mu.size() != n || sigma.size() != n) {
    throw std::invalid_argument("write_window_svg: series must be equal length and non-empty");
  }
  double lo = truth[0];
  double hi = truth[0];
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min({lo, truth[i], mu[i] - 2.0 * sigma[i]});
    hi = std::max({hi, truth[i], mu[i] + 2.0 * sigma[i]});
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;

  const double width = 800.0, height = 400.0, pad = 40.0;
  const auto x = [&](std::size_t i) {
    return n == 1 ? width / 2.0
                  : pad + (width - 2.0 * pad) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  const auto y = [&](double v) { return height - pad - (height - 2.0 * pad) * (v - lo) / (hi - lo); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 400\">\n"
      << "<rect width=\"800\" height=\"400\" fill=\"white\"/>\n";

  svg << "<polygon fill=\"#4a90d9\" opacity=\"0.25\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    svg << svg_coord(x(i)) << ',' << svg_coord(y(mu[i] + 2.0 * sigma[i])) << ' ';
  }
  for (std::size_t i = n; i-- > 0;) {
    svg << svg_coord(x(i)) << ',' << svg_coord(y(mu[i] - 2.0 * sigma[i])) << ' ';
  }
  svg << "\"/>\n";

  const auto polyline = [&](std::span<const double> series, const char* stroke) {
    svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      svg << svg_coord(x(i)) << ',' << svg_coord(y(series[i])) << ' ';
    }
    svg << "\"/>\n";
  };
  polyline(truth, "#222222");
  polyline(mu, "#1f6fbf");

  svg << "<text x=\"44\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222222\">"
      << "truth (dark), consensus mean (blue), band = mean +- 2 sigma</text>\n";
  svg << "</svg>\n";
  csv::write_file_atomic(path, svg.str());
}

}  // namespace concord::eval
