#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "concord/aggregates.hpp"
#include "concord/consensus.hpp"
#include "concord/csv.hpp"
#include "concord/errors.hpp"
#include "concord/experiment.hpp"

namespace {

using nlohmann::json;

void emit_error(const char* type, const std::string& message) {
  json j = {{"error", {{"type", type}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
}

concord::consensus::ConsensusDistribution load_consensus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw concord::DataError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return concord::consensus::from_json(buffer.str());
}

int cmd_run(const std::string& config_path, const std::string& output_override) {
  auto config = concord::experiment::ExperimentConfig::from_file(config_path);
  if (!output_override.empty()) config.output_dir = output_override;
  const auto summary = concord::experiment::run_experiment(config);

  std::printf("run: %zu windows -> %s\n", summary.n_windows,
              summary.output_dir.string().c_str());
  for (const auto& row : summary.consensus_scores.rows) {
    std::printf("  %-14s K=%-3zu crps=%.6g mae=%.6g\n", row.level.c_str(), row.K, row.crps,
                row.mae);
  }
  if (summary.numerical_flag) {
    emit_error("numerical", "covariance descent did not converge in every window");
    return 4;
  }
  return 0;
}

int cmd_query(const std::string& consensus_path, const std::string& weights_text,
              const std::string& kind_name, std::size_t K, std::size_t j) {
  const auto dist = load_consensus(consensus_path);

  concord::consensus::QueryResult result;
  if (!weights_text.empty()) {
    json parsed;
    try {
      parsed = json::parse(weights_text);
    } catch (const json::exception& e) {
      throw concord::ConfigError(std::string("query: --weights is not a JSON array: ") +
                                 e.what());
    }
    if (!parsed.is_array()) throw concord::ConfigError("query: --weights must be a JSON array");
    const auto weights = parsed.get<std::vector<double>>();
    if (weights.size() != dist.R()) {
      throw concord::ConfigError("query: weight vector has length " +
                                 std::to_string(weights.size()) + " but the horizon is " +
                                 std::to_string(dist.R()));
    }
    result = concord::consensus::marginalize(dist, weights);
  } else if (!kind_name.empty()) {
    const auto spec = concord::agg::make_spec(concord::agg::kind_from_name(kind_name), K);
    const auto weight = concord::agg::pad_weight(spec, j, dist.R());
    result = concord::consensus::marginalize(dist, weight);
  } else {
    throw concord::ConfigError("query: pass either --weights or --kind with --K/--j");
  }

  json out = {{"mean", result.mean},
              {"variance", result.variance},
              {"stddev", std::sqrt(result.variance)},
              {"jointly_constrained", result.jointly_constrained}};
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& truth_path,
             const std::string& value_column, const std::vector<std::size_t>& k_list,
             const std::vector<std::string>& kind_names, bool baseline) {
  concord::experiment::EvalRequest request;
  request.run_dir = run_dir;
  request.truth_path = truth_path;
  request.csv.value_column = value_column;
  request.k_list = k_list;
  if (!kind_names.empty()) {
    request.kinds.clear();
    for (const auto& name : kind_names) {
      request.kinds.push_back(concord::agg::kind_from_name(name));
    }
  }
  request.score_baseline = baseline;

  const auto summary = concord::experiment::evaluate_run(request);
  concord::csv::write_file_atomic(request.run_dir / "reports" / "eval_consensus.csv",
                                  summary.consensus_scores.to_csv());
  concord::csv::write_file_atomic(request.run_dir / "reports" / "eval_consensus.json",
                                  summary.consensus_scores.to_json());
  if (summary.baseline_available) {
    concord::csv::write_file_atomic(request.run_dir / "reports" / "eval_baseline.csv",
                                    summary.baseline_scores.to_csv());
    concord::csv::write_file_atomic(request.run_dir / "reports" / "eval_baseline.json",
                                    summary.baseline_scores.to_json());
  }
  std::cout << summary.consensus_scores.to_json() << "\n";
  return 0;
}

int cmd_inspect(const std::string& consensus_path) {
  const auto dist = load_consensus(consensus_path);
  double sigma_min = 0.0, sigma_max = 0.0;
  if (dist.sigma.size() > 0) {
    sigma_min = dist.sigma.minCoeff();
    sigma_max = dist.sigma.maxCoeff();
  }
  auto blocks = json::array();
  for (const auto& [offset, length] : dist.support_blocks) {
    blocks.push_back({{"offset", offset}, {"length", length}});
  }
  json out = {{"R", dist.R()},
              {"rank", dist.rank()},
              {"window", dist.window_index},
              {"target_begin", dist.target_begin},
              {"mu_mean", dist.R() ? dist.mu.mean() : 0.0},
              {"sigma_min", sigma_min},
              {"sigma_max", sigma_max},
              {"support_blocks", blocks},
              {"diagnostics",
               {{"objective", dist.diagnostics.objective},
                {"iterations", dist.diagnostics.iterations},
                {"grad_norm", dist.diagnostics.grad_norm},
                {"converged", dist.diagnostics.converged}}}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherent probabilistic forecasts across temporal aggregates"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  auto* run = app.add_subcommand("run", "Execute a rolling-origin experiment from a config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--output", output_override, "Override the configured output directory");

  std::string consensus_path;
  std::string weights_text;
  std::string kind_name;
  std::size_t K = 1;
  std::size_t j = 1;
  auto* query = app.add_subcommand("query", "Marginalize a linear statistic of a stored consensus");
  query->add_option("--consensus", consensus_path, "Consensus distribution (JSON)")->required();
  query->add_option("--weights", weights_text, "Raw horizon weight vector as a JSON array");
  query->add_option("--kind", kind_name, "Named statistic: base|average|trend|halfdiff");
  query->add_option("--K", K, "Window length of the named statistic");
  query->add_option("--j", j, "1-based window index of the named statistic");

  std::string run_dir;
  std::string truth_path;
  std::string value_column = "y";
  std::vector<std::size_t> k_list;
  std::vector<std::string> kind_names;
  bool no_baseline = false;
  auto* eval = app.add_subcommand("eval", "Re-score stored run artifacts against a truth CSV");
  eval->add_option("--run", run_dir, "Run output directory")->required();
  eval->add_option("--truth", truth_path, "Truth series CSV")->required();
  eval->add_option("--value-column", value_column, "Truth value column (default y)");
  eval->add_option("--K", k_list, "Window lengths to score (1 = base level)");
  eval->add_option("--kinds", kind_names, "Statistic kinds expanded per K");
  eval->add_flag("--no-baseline", no_baseline, "Skip the independence baseline");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Print a summary of a stored consensus");
  inspect->add_option("--consensus", inspect_path, "Consensus distribution (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, output_override);
    if (query->parsed()) return cmd_query(consensus_path, weights_text, kind_name, K, j);
    if (eval->parsed()) {
      return cmd_eval(run_dir, truth_path, value_column, k_list, kind_names, !no_baseline);
    }
    if (inspect->parsed()) return cmd_inspect(inspect_path);
  } catch (const concord::ConfigError& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const concord::DataError& e) {
    emit_error("data", e.what());
    return 3;
  } catch (const concord::NumericalError& e) {
    emit_error("numerical", e.what());
    return 4;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 1;
  }
  return 0;
}
