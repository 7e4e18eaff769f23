#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "concord/aggregates.hpp"
#include "concord/consensus.hpp"
#include "concord/evaluation.hpp"
#include "concord/forecasters.hpp"
#include "concord/series.hpp"

namespace concord::experiment {

struct DataConfig {
  std::string path;
  series::CsvSpec csv;
};

/// Which statistics to score after a run. K = 1 means the base level;
/// larger K values are expanded over `kinds`. When `k_list` is empty the
/// run scores the base level plus every configured aggregate level.
struct EvalConfig {
  std::vector<std::size_t> k_list;
  std::vector<agg::Kind> kinds = {agg::Kind::average, agg::Kind::halfdiff};
};

/**
 * @brief Everything one reproducible run needs.
 *
 * Parsed from JSON with strict key checking, defaults resolved at parse
 * time; `to_json_text` emits the fully resolved document so artifacts
 * always record the exact configuration that produced them.
 */
struct ExperimentConfig {
  DataConfig data;
  series::SplitSpec split;
  std::vector<forecast::Level> levels;
  std::size_t rank = 4;
  consensus::OptimizerConfig optimizer;  ///< seed is derived per window
  double sigma_min = 1e-6;
  std::uint64_t seed = 0;
  std::size_t stride = 0;  ///< 0 resolves to R
  std::size_t workers = 1;
  EvalConfig eval;
  std::string output_dir = "out";

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  std::string to_json_text() const;

  /// Every static precondition: divisibility, forecaster feasibility
  /// against the split, optimizer settings, evaluation combinations.
  void validate() const;

  /// The expanded evaluation statistics (base level for K = 1).
  std::vector<agg::AggregateSpec> eval_specs() const;

  std::size_t resolved_stride() const { return stride == 0 ? split.R : stride; }
};

struct RunSummary {
  std::filesystem::path output_dir;
  std::size_t n_windows = 0;
  bool numerical_flag = false;  ///< some window's covariance fit did not converge
  bool normalizer_floored = false;
  eval::ScoreReport consensus_scores;
  eval::ScoreReport baseline_scores;  ///< empty when no base level is configured
};

/**
 * @brief Execute a full rolling-origin run.
 *
 * Fits every level on the train segment (normalized), then for each test
 * window predicts all levels, reconciles them into one consensus
 * distribution in the original data space, and scores consensus and
 * independence-baseline queries. Windows are processed in parallel up to
 * `workers`; each draws its optimizer stream from a seed derived off the
 * run seed and the window index, so results do not depend on scheduling.
 *
 * Artifacts written under the output directory (all atomically):
 *   resolved_config.json, windows.json, forecasts/window_NNNN.csv,
 *   consensus/window_NNNN.json, plots/window_NNNN.svg,
 *   reports/scores_consensus.{csv,json} and, when a base level exists,
 *   reports/scores_baseline.{csv,json}.
 *
 * The CONCORD_OUTPUT_DIR environment variable overrides the configured
 * output directory; nothing else is read from the environment.
 */
RunSummary run_experiment(const ExperimentConfig& config);

/// Post-hoc scoring of stored run artifacts against a truth CSV, over a
/// freshly chosen set of statistics (they need not match the run's).
struct EvalRequest {
  std::filesystem::path run_dir;
  std::string truth_path;
  series::CsvSpec csv;
  std::vector<std::size_t> k_list;
  std::vector<agg::Kind> kinds = {agg::Kind::average, agg::Kind::halfdiff};
  bool score_baseline = true;
};

struct EvalSummary {
  eval::ScoreReport consensus_scores;
  eval::ScoreReport baseline_scores;
  bool baseline_available = false;
};

EvalSummary evaluate_run(const EvalRequest& request);

/// Helper shared by run/eval: expand (k_list, kinds) into concrete specs.
std::vector<agg::AggregateSpec> expand_eval_specs(const std::vector<std::size_t>& k_list,
                                                  const std::vector<agg::Kind>& kinds,
                                                  std::size_t R);

/// Zero-padded artifact stem for window `index`, e.g. "window_0003".
std::string window_stem(std::size_t index);

}  // namespace concord::experiment
