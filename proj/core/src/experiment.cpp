#include "concord/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "concord/csv.hpp"
#include "concord/errors.hpp"
#include "concord/rng.hpp"

namespace concord::experiment {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; }) == allowed.end()) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

json require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) {
    throw ConfigError("config: missing key '" + std::string(key) + "' in " + where);
  }
  return obj.at(key);
}

double default_alpha(agg::Kind kind) {
  switch (kind) {
    case agg::Kind::base: return 1.0;
    case agg::Kind::average: return 10.0;
    case agg::Kind::trend: return 0.5;
    default: return 1.0;
  }
}

series::MissingPolicy policy_from_name(const std::string& name) {
  if (name == "reject") return series::MissingPolicy::reject;
  if (name == "forward_fill") return series::MissingPolicy::forward_fill;
  throw ConfigError("config: missing_policy must be 'reject' or 'forward_fill', got '" + name +
                    "'");
}

const char* policy_name(series::MissingPolicy policy) {
  return policy == series::MissingPolicy::reject ? "reject" : "forward_fill";
}

forecast::ForecasterConfig parse_forecaster(const json& obj, double global_sigma_min) {
  check_keys(obj, {"kind", "season", "lag_order", "history_multiplier", "sigma_min"},
             "levels[].forecaster");
  forecast::ForecasterConfig fc;
  fc.kind = forecast::kind_from_name(require(obj, "kind", "forecaster").get<std::string>());
  fc.season = obj.value("season", std::size_t{1});
  fc.lag_order = obj.value("lag_order", std::size_t{1});
  fc.history_multiplier = obj.value("history_multiplier", std::size_t{2});
  fc.sigma_min = obj.value("sigma_min", global_sigma_min);
  return fc;
}

forecast::Level parse_level(const json& obj, double global_sigma_min) {
  check_keys(obj, {"kind", "K", "alpha", "name", "weights", "forecaster"}, "levels[]");
  const agg::Kind kind = agg::kind_from_name(require(obj, "kind", "levels[]").get<std::string>());
  const std::size_t K = obj.value("K", std::size_t{1});
  std::optional<std::vector<double>> weights;
  if (obj.contains("weights")) weights = obj["weights"].get<std::vector<double>>();
  std::optional<std::string> name;
  if (obj.contains("name")) name = obj["name"].get<std::string>();

  forecast::Level level;
  level.spec = agg::make_spec(kind, K, std::move(weights), std::move(name));
  level.alpha = obj.value("alpha", default_alpha(kind));
  if (obj.contains("forecaster")) {
    level.config = parse_forecaster(obj["forecaster"], global_sigma_min);
  } else {
    level.config.sigma_min = global_sigma_min;
  }
  return level;
}

std::size_t min_fit_observations(const forecast::ForecasterConfig& fc) {
  switch (fc.kind) {
    case forecast::Kind::climatology: return 2;
    case forecast::Kind::seasonal_naive: return fc.season + 1;
    case forecast::Kind::ar_ls: return fc.lag_order + 1;
  }
  return 2;
}

std::size_t min_history(const forecast::ForecasterConfig& fc) {
  switch (fc.kind) {
    case forecast::Kind::climatology: return 0;
    case forecast::Kind::seasonal_naive: return fc.season;
    case forecast::Kind::ar_ls: return fc.lag_order;
  }
  return 0;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j,
             {"data", "split", "levels", "consensus", "sigma_min", "seed", "stride", "workers",
              "evaluation", "output_dir"},
             "the top level");

  ExperimentConfig cfg;
  cfg.sigma_min = j.value("sigma_min", 1e-6);

  const json data = require(j, "data", "the top level");
  check_keys(data, {"path", "value_column", "feature_columns", "timestamp_column",
                    "missing_policy"},
             "data");
  cfg.data.path = require(data, "path", "data").get<std::string>();
  cfg.data.csv.value_column = require(data, "value_column", "data").get<std::string>();
  cfg.data.csv.feature_columns =
      data.value("feature_columns", std::vector<std::string>{});
  cfg.data.csv.timestamp_column = data.value("timestamp_column", std::string{});
  cfg.data.csv.policy = policy_from_name(data.value("missing_policy", std::string{"reject"}));

  const json split = require(j, "split", "the top level");
  check_keys(split, {"l_trn", "l_val", "l_test", "T", "R"}, "split");
  cfg.split.l_trn = require(split, "l_trn", "split").get<std::size_t>();
  cfg.split.l_val = require(split, "l_val", "split").get<std::size_t>();
  cfg.split.l_test = require(split, "l_test", "split").get<std::size_t>();
  cfg.split.T = require(split, "T", "split").get<std::size_t>();
  cfg.split.R = require(split, "R", "split").get<std::size_t>();

  const json levels = require(j, "levels", "the top level");
  if (!levels.is_array() || levels.empty()) {
    throw ConfigError("config: 'levels' must be a non-empty array");
  }
  for (const auto& entry : levels) cfg.levels.push_back(parse_level(entry, cfg.sigma_min));

  if (j.contains("consensus")) {
    const json cons = j["consensus"];
    check_keys(cons,
               {"rank", "max_iterations", "tolerance", "initial_step", "log_coeff",
                "init_v_scale"},
               "consensus");
    cfg.rank = cons.value("rank", std::size_t{4});
    cfg.optimizer.max_iterations = cons.value("max_iterations", std::size_t{10000});
    cfg.optimizer.tolerance = cons.value("tolerance", 1e-7);
    cfg.optimizer.initial_step = cons.value("initial_step", 0.1);
    cfg.optimizer.log_coeff = cons.value("log_coeff", 0.5);
    cfg.optimizer.init_v_scale = cons.value("init_v_scale", 1e-2);
  }

  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.stride = j.value("stride", std::size_t{0});
  cfg.workers = j.value("workers", std::size_t{1});

  if (j.contains("evaluation")) {
    const json ev = j["evaluation"];
    check_keys(ev, {"K", "kinds"}, "evaluation");
    cfg.eval.k_list = ev.value("K", std::vector<std::size_t>{});
    if (ev.contains("kinds")) {
      cfg.eval.kinds.clear();
      for (const auto& name : ev["kinds"]) {
        cfg.eval.kinds.push_back(agg::kind_from_name(name.get<std::string>()));
      }
    }
  }

  cfg.output_dir = j.value("output_dir", std::string{"out"});
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["data"] = {{"path", data.path},
               {"value_column", data.csv.value_column},
               {"feature_columns", data.csv.feature_columns},
               {"timestamp_column", data.csv.timestamp_column},
               {"missing_policy", policy_name(data.csv.policy)}};
  j["split"] = {{"l_trn", split.l_trn},
                {"l_val", split.l_val},
                {"l_test", split.l_test},
                {"T", split.T},
                {"R", split.R}};
  auto levels_json = json::array();
  for (const auto& level : levels) {
    json entry = {{"name", level.spec.name},
                  {"kind", agg::kind_name(level.spec.kind)},
                  {"K", level.spec.K},
                  {"alpha", level.alpha},
                  {"forecaster",
                   {{"kind", forecast::kind_name(level.config.kind)},
                    {"season", level.config.season},
                    {"lag_order", level.config.lag_order},
                    {"history_multiplier", level.config.history_multiplier},
                    {"sigma_min", level.config.sigma_min}}}};
    // Builtin kinds rederive their weights from (kind, K) when parsed back;
    // only custom weights are part of the configuration itself.
    if (level.spec.kind == agg::Kind::custom) entry["weights"] = level.spec.weights;
    levels_json.push_back(std::move(entry));
  }
  j["levels"] = std::move(levels_json);
  j["consensus"] = {{"rank", rank},
                    {"max_iterations", optimizer.max_iterations},
                    {"tolerance", optimizer.tolerance},
                    {"initial_step", optimizer.initial_step},
                    {"log_coeff", optimizer.log_coeff},
                    {"init_v_scale", optimizer.init_v_scale}};
  j["sigma_min"] = sigma_min;
  j["seed"] = seed;
  j["stride"] = resolved_stride();
  j["workers"] = workers;
  auto kinds = json::array();
  for (const auto kind : eval.kinds) kinds.push_back(agg::kind_name(kind));
  j["evaluation"] = {{"K", eval.k_list}, {"kinds", std::move(kinds)}};
  j["output_dir"] = output_dir;
  return j.dump(2);
}

void ExperimentConfig::validate() const {
  if (data.path.empty()) throw ConfigError("config: data.path must be set");
  if (data.csv.value_column.empty()) throw ConfigError("config: data.value_column must be set");
  if (split.T == 0 || split.R == 0) throw ConfigError("config: split T and R must be positive");
  if (split.l_trn < split.T + split.R) {
    throw ConfigError("config: l_trn must be at least T + R");
  }
  if (levels.empty()) throw ConfigError("config: at least one level is required");
  if (!(sigma_min > 0.0)) throw ConfigError("config: sigma_min must be positive");
  if (workers == 0) throw ConfigError("config: workers must be >= 1");
  if (rank > split.R) throw ConfigError("config: consensus rank must not exceed R");
  if (optimizer.max_iterations == 0) throw ConfigError("config: max_iterations must be >= 1");
  if (!(optimizer.tolerance > 0.0)) throw ConfigError("config: tolerance must be positive");
  if (!(optimizer.initial_step > 0.0)) throw ConfigError("config: initial_step must be positive");
  if (!(optimizer.log_coeff > 0.0)) throw ConfigError("config: log_coeff must be positive");
  if (optimizer.init_v_scale < 0.0) {
    throw ConfigError("config: init_v_scale must be non-negative");
  }

  std::set<std::string> names;
  for (const auto& level : levels) {
    const auto& spec = level.spec;
    if (!names.insert(spec.name).second) {
      throw ConfigError("config: duplicate level name '" + spec.name + "'");
    }
    if (split.R % spec.K != 0) {
      throw ConfigError("config: level '" + spec.name + "': R = " + std::to_string(split.R) +
                        " is not a multiple of K = " + std::to_string(spec.K));
    }
    if (!(level.alpha > 0.0)) {
      throw ConfigError("config: level '" + spec.name + "': alpha must be positive");
    }
    level.config.validate();

    const std::size_t train_windows = split.l_trn / spec.K;
    if (train_windows < min_fit_observations(level.config)) {
      throw ConfigError("config: level '" + spec.name + "': train segment provides " +
                        std::to_string(train_windows) + " aggregated observations but '" +
                        forecast::kind_name(level.config.kind) + "' needs at least " +
                        std::to_string(min_fit_observations(level.config)));
    }
    const std::size_t budget = level.config.history_multiplier * split.T / spec.K;
    if (budget == 0) {
      throw ConfigError("config: level '" + spec.name +
                        "': history budget B*T/K is zero; increase T or B");
    }
    if (budget < min_history(level.config)) {
      throw ConfigError("config: level '" + spec.name + "': history budget B*T/K = " +
                        std::to_string(budget) + " is below what '" +
                        forecast::kind_name(level.config.kind) +
                        "' needs (season/lag = " + std::to_string(min_history(level.config)) +
                        ")");
    }
  }

  expand_eval_specs(eval.k_list, eval.kinds, split.R);  // throws on bad combinations
}

std::vector<agg::AggregateSpec> expand_eval_specs(const std::vector<std::size_t>& k_list,
                                                  const std::vector<agg::Kind>& kinds,
                                                  std::size_t R) {
  std::vector<std::size_t> ks = k_list;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  std::vector<agg::AggregateSpec> specs;
  std::set<std::string> seen;
  for (const std::size_t K : ks) {
    if (K == 0) throw ConfigError("evaluation: K must be positive");
    if (R % K != 0) {
      throw ConfigError("evaluation: K = " + std::to_string(K) +
                        " does not divide the horizon R = " + std::to_string(R));
    }
    if (K == 1) {
      auto spec = agg::make_spec(agg::Kind::base, 1);
      if (seen.insert(spec.name).second) specs.push_back(std::move(spec));
      continue;
    }
    for (const agg::Kind kind : kinds) {
      if (kind == agg::Kind::base || kind == agg::Kind::custom) continue;
      auto spec = agg::make_spec(kind, K);  // throws for odd-K halfdiff
      if (seen.insert(spec.name).second) specs.push_back(std::move(spec));
    }
  }
  return specs;
}

std::vector<agg::AggregateSpec> ExperimentConfig::eval_specs() const {
  if (eval.k_list.empty()) {
    std::vector<agg::AggregateSpec> specs;
    std::set<std::string> seen;
    auto base = agg::make_spec(agg::Kind::base, 1);
    seen.insert(base.name);
    specs.push_back(std::move(base));
    for (const auto& level : levels) {
      if (level.spec.kind == agg::Kind::base) continue;
      if (seen.insert(level.spec.name).second) specs.push_back(level.spec);
    }
    return specs;
  }
  return expand_eval_specs(eval.k_list, eval.kinds, split.R);
}

std::string window_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "window_%04zu", index);
  return buf;
}

namespace {

struct WindowResult {
  consensus::ConsensusDistribution dist;
  std::vector<forecast::GaussianForecast> level_forecasts;  // config order, original space
  std::vector<double> truth;
};

struct FittedLevel {
  const forecast::Level* level;
  forecast::Forecaster model;
};

WindowResult process_window(const ExperimentConfig& config, std::size_t index,
                            std::size_t target_begin,
                            const std::vector<FittedLevel>& fitted,
                            const std::vector<double>& normalized,
                            const series::Normalizer& norm,
                            const std::vector<double>& original) {
  const std::size_t R = config.split.R;
  const std::size_t T = config.split.T;

  WindowResult result;
  std::vector<consensus::LevelForecastInput> inputs;
  inputs.reserve(fitted.size());
  for (const auto& fl : fitted) {
    const auto& spec = fl.level->spec;
    const std::span<const double> prefix(normalized.data(), target_begin);
    const std::size_t budget = fl.level->config.history_multiplier * T / spec.K;
    const auto history = agg::aggregate_tail(prefix, spec, budget);
    forecast::GaussianForecast f = fl.model.predict(history, R / spec.K);
    f.level = spec.name;

    const double wsum = spec.weight_sum();
    for (std::size_t h = 0; h < f.horizon(); ++h) {
      f.mu[h] = norm.stddev * f.mu[h] + norm.mean * wsum;
      f.sigma[h] = norm.stddev * f.sigma[h];
    }
    result.level_forecasts.push_back(f);
    inputs.push_back({spec, std::move(f), fl.level->alpha});
  }

  consensus::OptimizerConfig opt = config.optimizer;
  opt.seed = rng::derive_seed(config.seed, index);
  result.dist = consensus::reconcile(inputs, R, config.rank, opt);
  result.dist.window_index = static_cast<long>(index);
  result.dist.target_begin = static_cast<long>(target_begin);
  result.truth.assign(original.begin() + target_begin, original.begin() + target_begin + R);
  return result;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  std::filesystem::path outdir = config.output_dir;
  if (const char* env = std::getenv("CONCORD_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    outdir = env;
  }

  series::IngestReport ingest_report;
  const series::TimeSeries data =
      series::ingest_csv(config.data.path, config.data.csv, &ingest_report);
  const series::Splits splits = series::split(data, config.split);

  const std::span<const double> train(data.values.data() + splits.train.begin,
                                      splits.train.size());
  const series::Normalizer norm = series::Normalizer::fit(train);
  if (norm.floored) {
    std::fprintf(stderr, "warning: train spread below %g, normalizer floored\n",
                 series::Normalizer::kFloor);
  }
  const std::vector<double> normalized = norm.apply(data.values);

  std::vector<FittedLevel> fitted;
  fitted.reserve(config.levels.size());
  const std::span<const double> train_normalized(normalized.data(), splits.train.size());
  for (const auto& level : config.levels) {
    const auto aggregated = agg::aggregate_tail(train_normalized, level.spec);
    fitted.push_back({&level, forecast::Forecaster::fit(aggregated, level.config)});
  }

  const auto windows = series::rolling_windows(splits.test.size(), config.split.T, config.split.R,
                                               config.resolved_stride());
  if (windows.empty()) {
    throw DataError("run: test segment too short for a single forecast window");
  }

  std::vector<WindowResult> results(windows.size());
  const std::size_t workers = std::min<std::size_t>(config.workers, windows.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < windows.size(); ++i) {
      results[i] = process_window(config, i, splits.test.begin + windows[i].target_begin, fitted,
                                  normalized, norm, data.values);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= windows.size()) return;
        try {
          results[i] = process_window(config, i, splits.test.begin + windows[i].target_begin,
                                      fitted, normalized, norm, data.values);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Scoring.
  std::vector<consensus::ConsensusDistribution> dists;
  std::vector<std::vector<double>> truths;
  dists.reserve(results.size());
  truths.reserve(results.size());
  for (auto& r : results) {
    dists.push_back(r.dist);
    truths.push_back(r.truth);
  }

  long base_index = -1;
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    if (config.levels[i].spec.kind == agg::Kind::base) {
      base_index = static_cast<long>(i);
      break;
    }
  }

  const auto specs = config.eval_specs();
  RunSummary summary;
  summary.output_dir = outdir;
  summary.n_windows = windows.size();
  summary.normalizer_floored = norm.floored;
  summary.consensus_scores = eval::evaluate_consensus(dists, truths, specs);
  if (base_index >= 0) {
    std::vector<forecast::GaussianForecast> base_forecasts;
    base_forecasts.reserve(results.size());
    for (const auto& r : results) {
      base_forecasts.push_back(r.level_forecasts[static_cast<std::size_t>(base_index)]);
    }
    summary.baseline_scores = eval::evaluate_baseline(base_forecasts, truths, specs);
  }
  for (const auto& r : results) {
    if (!r.dist.diagnostics.converged) summary.numerical_flag = true;
  }

  // Artifacts.
  csv::write_file_atomic(outdir / "resolved_config.json", config.to_json_text());

  json manifest;
  manifest["T"] = config.split.T;
  manifest["R"] = config.split.R;
  manifest["stride"] = config.resolved_stride();
  manifest["seed"] = config.seed;
  manifest["n_windows"] = windows.size();
  manifest["ingest"] = {{"rows_read", ingest_report.rows_read},
                        {"rows_rejected", ingest_report.rows_rejected},
                        {"rows_filled", ingest_report.rows_filled}};
  auto levels_json = json::array();
  for (const auto& level : config.levels) {
    levels_json.push_back({{"name", level.spec.name},
                           {"kind", agg::kind_name(level.spec.kind)},
                           {"K", level.spec.K},
                           {"alpha", level.alpha},
                           {"weights", level.spec.weights}});
  }
  manifest["levels"] = std::move(levels_json);
  auto windows_json = json::array();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    windows_json.push_back(
        {{"index", i}, {"target_begin", splits.test.begin + windows[i].target_begin}});
  }
  manifest["windows"] = std::move(windows_json);
  csv::write_file_atomic(outdir / "windows.json", manifest.dump(2));

  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto stem = window_stem(i);
    forecast::write_forecasts_csv(outdir / "forecasts" / (stem + ".csv"),
                                  results[i].level_forecasts);
    csv::write_file_atomic(outdir / "consensus" / (stem + ".json"),
                           consensus::to_json(results[i].dist));

    const auto& dist = results[i].dist;
    std::vector<double> marginal_sd(dist.R());
    for (std::size_t t = 0; t < dist.R(); ++t) {
      marginal_sd[t] =
          std::sqrt(dist.sigma(t) * dist.sigma(t) + dist.V.row(t).squaredNorm());
    }
    std::vector<double> mu(dist.mu.data(), dist.mu.data() + dist.mu.size());
    eval::write_window_svg(outdir / "plots" / (stem + ".svg"), results[i].truth, mu, marginal_sd);
  }

  summary.consensus_scores.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  csv::write_file_atomic(outdir / "reports" / "scores_consensus.csv",
                         summary.consensus_scores.to_csv());
  csv::write_file_atomic(outdir / "reports" / "scores_consensus.json",
                         summary.consensus_scores.to_json());
  if (base_index >= 0) {
    csv::write_file_atomic(outdir / "reports" / "scores_baseline.csv",
                           summary.baseline_scores.to_csv());
    csv::write_file_atomic(outdir / "reports" / "scores_baseline.json",
                           summary.baseline_scores.to_json());
  }

  if (summary.numerical_flag) {
    std::fprintf(stderr,
                 "warning: covariance descent did not reach tolerance in every window\n");
  }
  return summary;
}

EvalSummary evaluate_run(const EvalRequest& request) {
  std::ifstream manifest_in(request.run_dir / "windows.json");
  if (!manifest_in) {
    throw DataError("eval: cannot open " + (request.run_dir / "windows.json").string() +
                    "; is this a run directory?");
  }
  json manifest;
  try {
    manifest_in >> manifest;
  } catch (const json::exception& e) {
    throw DataError(std::string("eval: malformed windows.json: ") + e.what());
  }

  const std::size_t R = manifest.at("R").get<std::size_t>();
  struct WindowRef {
    std::size_t index;
    std::size_t target_begin;
  };
  std::vector<WindowRef> windows;
  for (const auto& w : manifest.at("windows")) {
    windows.push_back({w.at("index").get<std::size_t>(), w.at("target_begin").get<std::size_t>()});
  }
  if (windows.empty()) throw DataError("eval: run contains no windows");

  const series::TimeSeries truth_series =
      series::ingest_csv(request.truth_path, request.csv, nullptr);

  std::vector<consensus::ConsensusDistribution> dists;
  std::vector<std::vector<double>> truths;
  for (const auto& w : windows) {
    std::ifstream in(request.run_dir / "consensus" / (window_stem(w.index) + ".json"));
    if (!in) throw DataError("eval: missing consensus artifact for window " +
                             std::to_string(w.index));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    dists.push_back(consensus::from_json(buffer.str()));
    if (dists.back().R() != R) throw DataError("eval: consensus horizon mismatch");
    if (w.target_begin + R > truth_series.size()) {
      throw DataError("eval: truth series too short for window " + std::to_string(w.index));
    }
    truths.emplace_back(truth_series.values.begin() + w.target_begin,
                        truth_series.values.begin() + w.target_begin + R);
  }

  std::vector<agg::AggregateSpec> specs;
  if (request.k_list.empty()) {
    std::set<std::string> seen;
    auto base = agg::make_spec(agg::Kind::base, 1);
    seen.insert(base.name);
    specs.push_back(std::move(base));
    for (const auto& level : manifest.at("levels")) {
      const auto kind = agg::kind_from_name(level.at("kind").get<std::string>());
      if (kind == agg::Kind::base) continue;
      std::optional<std::vector<double>> weights;
      if (kind == agg::Kind::custom) weights = level.at("weights").get<std::vector<double>>();
      auto spec = agg::make_spec(kind, level.at("K").get<std::size_t>(), std::move(weights),
                                 level.at("name").get<std::string>());
      if (seen.insert(spec.name).second) specs.push_back(std::move(spec));
    }
  } else {
    specs = expand_eval_specs(request.k_list, request.kinds, R);
  }

  EvalSummary summary;
  summary.consensus_scores = eval::evaluate_consensus(dists, truths, specs);

  if (request.score_baseline) {
    std::string base_name;
    for (const auto& level : manifest.at("levels")) {
      if (level.at("kind").get<std::string>() == "base") {
        base_name = level.at("name").get<std::string>();
        break;
      }
    }
    if (!base_name.empty()) {
      std::vector<forecast::GaussianForecast> base_forecasts;
      for (const auto& w : windows) {
        const auto all = forecast::read_forecasts_csv(request.run_dir / "forecasts" /
                                                      (window_stem(w.index) + ".csv"));
        const auto it = std::find_if(all.begin(), all.end(), [&](const auto& f) {
          return f.level == base_name;
        });
        if (it == all.end()) {
          throw DataError("eval: base forecasts missing for window " + std::to_string(w.index));
        }
        base_forecasts.push_back(*it);
      }
      summary.baseline_scores = eval::evaluate_baseline(base_forecasts, truths, specs);
      summary.baseline_available = true;
    }
  }
  return summary;
}

}  // namespace concord::experiment
