#include "concord/aggregates.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "concord/errors.hpp"

namespace concord::agg {

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::base: return "base";
    case Kind::average: return "average";
    case Kind::trend: return "trend";
    case Kind::halfdiff: return "halfdiff";
    case Kind::custom: return "custom";
  }
  return "unknown";
}

Kind kind_from_name(const std::string& name) {
  if (name == "base") return Kind::base;
  if (name == "average") return Kind::average;
  if (name == "trend") return Kind::trend;
  if (name == "halfdiff") return Kind::halfdiff;
  if (name == "custom") return Kind::custom;
  throw ConfigError("unknown aggregate kind: '" + name + "'");
}

double AggregateSpec::weight_sum() const {
  double s = 0.0;
  for (const double w : weights) s += w;
  return s;
}

AggregateSpec make_spec(Kind kind, std::size_t K,
                        std::optional<std::vector<double>> custom_weights,
                        std::optional<std::string> name) {
  if (K == 0) throw ConfigError("aggregate: K must be positive");
  AggregateSpec spec;
  spec.kind = kind;
  spec.K = K;
  switch (kind) {
    case Kind::base:
      if (K != 1) throw ConfigError("aggregate: base level requires K = 1");
      spec.weights = {1.0};
      break;
    case Kind::average:
      spec.weights.assign(K, 1.0 / static_cast<double>(K));
      break;
    case Kind::trend: {
      if (K < 2) throw ConfigError("aggregate: trend requires K >= 2");
      const double denom = 2.0 * static_cast<double>(K);
      spec.weights.resize(K);
      for (std::size_t r = 1; r <= K; ++r) {
        spec.weights[r - 1] = (2.0 * static_cast<double>(r) - static_cast<double>(K) - 1.0) / denom;
      }
      break;
    }
    case Kind::halfdiff: {
      if (K < 2 || K % 2 != 0) throw ConfigError("aggregate: halfdiff requires an even K >= 2");
      const double w = 2.0 / static_cast<double>(K);
      spec.weights.resize(K);
      for (std::size_t r = 0; r < K; ++r) spec.weights[r] = r < K / 2 ? -w : w;
      break;
    }
    case Kind::custom: {
      if (!custom_weights) throw ConfigError("aggregate: custom kind requires explicit weights");
      if (custom_weights->size() != K) {
        throw ConfigError("aggregate: custom weights must have exactly K entries");
      }
      const bool all_zero = std::all_of(custom_weights->begin(), custom_weights->end(),
                                        [](double w) { return w == 0.0; });
      if (all_zero) throw ConfigError("aggregate: custom weights must not all be zero");
      for (const double w : *custom_weights) {
        if (!std::isfinite(w)) throw ConfigError("aggregate: custom weights must be finite");
      }
      spec.weights = *custom_weights;
      break;
    }
  }
  if (custom_weights && kind != Kind::custom) {
    throw ConfigError("aggregate: explicit weights are only valid for the custom kind");
  }
  spec.name = name ? *name
                   : (kind == Kind::base ? std::string("base")
                                         : std::string(kind_name(kind)) + std::to_string(K));
  return spec;
}

std::string spec_to_json(const AggregateSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["kind"] = kind_name(spec.kind);
  j["K"] = spec.K;
  j["weights"] = spec.weights;
  return j.dump();
}

AggregateSpec spec_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("aggregate spec: invalid JSON: ") + e.what());
  }
  const Kind kind = kind_from_name(j.at("kind").get<std::string>());
  const std::size_t K = j.at("K").get<std::size_t>();
  std::optional<std::vector<double>> weights;
  if (kind == Kind::custom) weights = j.at("weights").get<std::vector<double>>();
  std::optional<std::string> name;
  if (j.contains("name")) name = j["name"].get<std::string>();
  return make_spec(kind, K, std::move(weights), std::move(name));
}

namespace {

double window_dot(std::span<const double> values, std::size_t start,
                  const std::vector<double>& weights) {
  double z = 0.0;
  for (std::size_t r = 0; r < weights.size(); ++r) z += weights[r] * values[start + r];
  return z;
}

}  // namespace

std::vector<double> aggregate_values(std::span<const double> values, const AggregateSpec& spec) {
  if (values.size() < spec.K) {
    throw DataError("aggregate: series of length " + std::to_string(values.size()) +
                    " is shorter than one window of K = " + std::to_string(spec.K));
  }
  const std::size_t windows = values.size() / spec.K;
  std::vector<double> out(windows);
  for (std::size_t j = 0; j < windows; ++j) out[j] = window_dot(values, j * spec.K, spec.weights);
  return out;
}

AggregateSeries aggregate_series(const series::TimeSeries& input, const AggregateSpec& spec) {
  AggregateSeries out;
  out.spec = spec;
  out.values = aggregate_values(input.values, spec);
  out.dropped = input.size() % spec.K;
  if (!input.features.empty()) {
    const std::size_t windows = out.values.size();
    const std::size_t dim = input.feature_dim();
    out.features.resize(windows, std::vector<double>(dim, 0.0));
    for (std::size_t j = 0; j < windows; ++j) {
      for (std::size_t r = 0; r < spec.K; ++r) {
        const auto& row = input.features[j * spec.K + r];
        for (std::size_t d = 0; d < dim; ++d) out.features[j][d] += row[d];
      }
      for (std::size_t d = 0; d < dim; ++d) out.features[j][d] /= static_cast<double>(spec.K);
    }
  }
  return out;
}

std::vector<double> aggregate_tail(std::span<const double> values, const AggregateSpec& spec,
                                   std::size_t max_windows) {
  if (values.size() < spec.K) {
    throw DataError("aggregate: tail shorter than one window of K = " + std::to_string(spec.K));
  }
  std::size_t windows = values.size() / spec.K;
  if (max_windows > 0) windows = std::min(windows, max_windows);
  const std::size_t start = values.size() - windows * spec.K;
  std::vector<double> out(windows);
  for (std::size_t j = 0; j < windows; ++j) {
    out[j] = window_dot(values, start + j * spec.K, spec.weights);
  }
  return out;
}

std::vector<double> PaddedWeight::dense() const {
  std::vector<double> v(horizon, 0.0);
  for (std::size_t r = 0; r < window.size(); ++r) v[offset + r] = window[r];
  return v;
}

double PaddedWeight::dot(std::span<const double> horizon_values) const {
  if (horizon_values.size() != horizon) {
    throw std::invalid_argument("PaddedWeight::dot: vector length does not match horizon");
  }
  double z = 0.0;
  for (std::size_t r = 0; r < window.size(); ++r) z += window[r] * horizon_values[offset + r];
  return z;
}

PaddedWeight pad_weight(const AggregateSpec& spec, std::size_t j, std::size_t R) {
  if (j == 0) throw ConfigError("pad_weight: window index j is 1-based");
  if (j * spec.K > R) {
    throw ConfigError("pad_weight: window " + std::to_string(j) + " of K = " +
                      std::to_string(spec.K) + " does not fit in horizon R = " + std::to_string(R));
  }
  PaddedWeight w;
  w.horizon = R;
  w.offset = (j - 1) * spec.K;
  w.window = spec.weights;
  return w;
}

std::vector<PaddedWeight> tile_horizon(const AggregateSpec& spec, std::size_t R) {
  if (R == 0 || R % spec.K != 0) {
    throw ConfigError("tile_horizon: horizon R = " + std::to_string(R) +
                      " is not a positive multiple of K = " + std::to_string(spec.K));
  }
  const std::size_t count = R / spec.K;
  std::vector<PaddedWeight> tiles;
  tiles.reserve(count);
  for (std::size_t j = 1; j <= count; ++j) tiles.push_back(pad_weight(spec, j, R));
  return tiles;
}

}  // namespace concord::agg
