#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "concord/errors.hpp"
#include "concord/experiment.hpp"
#include "concord/synthetic.hpp"
#include "temp_dir.hpp"

using namespace concord;

namespace {

std::string minimal_config(const std::string& data_path, const std::string& out_dir) {
  nlohmann::json j = {
      {"data", {{"path", data_path}, {"value_column", "y"}}},
      {"split", {{"l_trn", 300}, {"l_val", 60}, {"l_test", 60}, {"T", 24}, {"R", 12}}},
      {"levels",
       {{{"kind", "base"}},
        {{"kind", "average"},
         {"K", 3},
         {"forecaster", {{"kind", "ar_ls"}, {"lag_order", 2}}}}}},
      {"consensus", {{"rank", 2}, {"max_iterations", 4000}}},
      {"seed", 5},
      {"output_dir", out_dir},
  };
  return j.dump();
}

std::string write_sinusoid(const testutil::TempDir& dir, std::size_t n) {
  const auto path = dir / "series.csv";
  synth::write_csv(path, synth::sinusoid_ar1(n, 4.0, 60.0, 0.6, 0.5, 13));
  return path.string();
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("experiment: config parsing materializes defaults") {
  testutil::TempDir dir;
  const auto cfg = experiment::ExperimentConfig::from_json_text(
      minimal_config((dir / "x.csv").string(), (dir / "out").string()));

  CHECK(cfg.rank == 2);
  CHECK(cfg.optimizer.max_iterations == 4000);
  CHECK(cfg.optimizer.tolerance == 1e-7);
  CHECK(cfg.optimizer.log_coeff == 0.5);
  CHECK(cfg.sigma_min == 1e-6);
  CHECK(cfg.workers == 1);
  CHECK(cfg.resolved_stride() == 12);

  REQUIRE(cfg.levels.size() == 2);
  CHECK(cfg.levels[0].alpha == 1.0);       // base default
  CHECK(cfg.levels[1].alpha == 10.0);      // average default
  CHECK(cfg.levels[0].config.kind == forecast::Kind::climatology);
  CHECK(cfg.levels[1].config.kind == forecast::Kind::ar_ls);
  CHECK(cfg.levels[1].config.history_multiplier == 2);
  CHECK(cfg.levels[1].config.sigma_min == 1e-6);
  CHECK(cfg.levels[1].spec.name == "average3");

  // The resolved document re-parses to the same configuration.
  const auto back = experiment::ExperimentConfig::from_json_text(cfg.to_json_text());
  CHECK(back.rank == cfg.rank);
  CHECK(back.levels[1].alpha == cfg.levels[1].alpha);
  CHECK(back.stride == cfg.resolved_stride());
}

TEST_CASE("experiment: config rejects unknown keys and bad combinations") {
  testutil::TempDir dir;
  const auto base_text = minimal_config((dir / "x.csv").string(), (dir / "out").string());
  auto j = nlohmann::json::parse(base_text);

  SUBCASE("unknown top-level key") {
    j["typo"] = 1;
    CHECK_THROWS_WITH_AS(experiment::ExperimentConfig::from_json_text(j.dump()),
                         doctest::Contains("typo"), ConfigError);
  }
  SUBCASE("unknown level key") {
    j["levels"][0]["weight"] = 2.0;
    CHECK_THROWS_AS(experiment::ExperimentConfig::from_json_text(j.dump()), ConfigError);
  }
  SUBCASE("horizon must be divisible by every level's K") {
    j["split"]["R"] = 168;
    j["split"]["l_trn"] = 2000;
    j["split"]["l_val"] = 400;
    j["split"]["l_test"] = 400;
    j["levels"][1]["K"] = 5;
    CHECK_THROWS_WITH_AS(experiment::ExperimentConfig::from_json_text(j.dump()),
                         doctest::Contains("not a multiple"), ConfigError);
  }
  SUBCASE("forecaster must be fittable on the train segment") {
    j["levels"][1]["forecaster"] = {{"kind", "seasonal_naive"}, {"season", 500}};
    CHECK_THROWS_AS(experiment::ExperimentConfig::from_json_text(j.dump()), ConfigError);
  }
  SUBCASE("seasonal history must fit the level budget") {
    // Train can fit the season, but B*T/K windows cannot.
    j["levels"][1]["forecaster"] = {{"kind", "seasonal_naive"}, {"season", 60}};
    CHECK_THROWS_WITH_AS(experiment::ExperimentConfig::from_json_text(j.dump()),
                         doctest::Contains("history budget"), ConfigError);
  }
  SUBCASE("rank cannot exceed the horizon") {
    j["consensus"]["rank"] = 13;
    CHECK_THROWS_AS(experiment::ExperimentConfig::from_json_text(j.dump()), ConfigError);
  }
  SUBCASE("evaluation K values must divide R") {
    j["evaluation"] = {{"K", {5}}};
    CHECK_THROWS_AS(experiment::ExperimentConfig::from_json_text(j.dump()), ConfigError);
  }
  SUBCASE("duplicate level names") {
    j["levels"][1]["name"] = "base";
    CHECK_THROWS_WITH_AS(experiment::ExperimentConfig::from_json_text(j.dump()),
                         doctest::Contains("duplicate"), ConfigError);
  }
}

TEST_CASE("experiment: evaluation spec expansion") {
  const std::vector<agg::Kind> kinds = {agg::Kind::average, agg::Kind::halfdiff};

  SUBCASE("K = 1 is the base level") {
    const auto specs = experiment::expand_eval_specs({1}, kinds, 16);
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].kind == agg::Kind::base);
  }
  SUBCASE("every K expands over the kinds") {
    const auto specs = experiment::expand_eval_specs({4, 8}, kinds, 16);
    REQUIRE(specs.size() == 4);
    CHECK(specs[0].name == "average4");
    CHECK(specs[1].name == "halfdiff4");
    CHECK(specs[2].name == "average8");
    CHECK(specs[3].name == "halfdiff8");
  }
  SUBCASE("duplicates collapse") {
    const auto specs = experiment::expand_eval_specs({4, 4, 1, 1}, kinds, 16);
    CHECK(specs.size() == 3);
  }
  SUBCASE("odd K with halfdiff is rejected") {
    CHECK_THROWS_AS(experiment::expand_eval_specs({3}, kinds, 12), ConfigError);
  }
  SUBCASE("K must divide R") {
    CHECK_THROWS_AS(experiment::expand_eval_specs({5}, kinds, 16), ConfigError);
  }
}

TEST_CASE("experiment: window stems are zero padded") {
  CHECK(experiment::window_stem(0) == "window_0000");
  CHECK(experiment::window_stem(3) == "window_0003");
  CHECK(experiment::window_stem(1234) == "window_1234");
}

TEST_CASE("experiment: a full run writes every artifact and is deterministic") {
  testutil::TempDir dir;
  const auto data_path = write_sinusoid(dir, 420);
  const auto out_a = (dir / "run_a").string();
  const auto out_b = (dir / "run_b").string();

  auto cfg = experiment::ExperimentConfig::from_json_text(minimal_config(data_path, out_a));
  const auto summary = experiment::run_experiment(cfg);
  CHECK(summary.n_windows == 5);
  REQUIRE_FALSE(summary.consensus_scores.rows.empty());
  CHECK(summary.consensus_scores.rows[0].n_windows == 5);
  REQUIRE_FALSE(summary.baseline_scores.rows.empty());

  for (const char* name :
       {"resolved_config.json", "windows.json", "forecasts/window_0000.csv",
        "forecasts/window_0001.csv", "consensus/window_0000.json", "consensus/window_0001.json",
        "plots/window_0000.svg", "reports/scores_consensus.csv",
        "reports/scores_consensus.json", "reports/scores_baseline.csv",
        "reports/scores_baseline.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(std::filesystem::path(out_a) / name), name);
  }

  SUBCASE("same config and seed reproduce byte-identical artifacts") {
    auto cfg_b = cfg;
    cfg_b.output_dir = out_b;
    cfg_b.workers = 3;  // scheduling must not affect results
    experiment::run_experiment(cfg_b);
    for (const char* name :
         {"windows.json", "forecasts/window_0000.csv", "consensus/window_0000.json",
          "consensus/window_0001.json", "reports/scores_consensus.csv",
          "reports/scores_baseline.json"}) {
      CHECK_MESSAGE(slurp(std::filesystem::path(out_a) / name) ==
                        slurp(std::filesystem::path(out_b) / name),
                    name);
    }
  }

  SUBCASE("stored artifacts re-score to the run's own report") {
    experiment::EvalRequest request;
    request.run_dir = out_a;
    request.truth_path = data_path;
    request.csv.value_column = "y";
    const auto eval_summary = experiment::evaluate_run(request);
    REQUIRE(eval_summary.consensus_scores.rows.size() ==
            summary.consensus_scores.rows.size());
    for (std::size_t i = 0; i < eval_summary.consensus_scores.rows.size(); ++i) {
      CHECK(eval_summary.consensus_scores.rows[i].crps ==
            doctest::Approx(summary.consensus_scores.rows[i].crps).epsilon(1e-9));
    }
    CHECK(eval_summary.baseline_available);
  }

  SUBCASE("different seeds leave scores close but artifacts distinct") {
    auto cfg_b = cfg;
    cfg_b.output_dir = out_b;
    cfg_b.seed = 6;
    experiment::run_experiment(cfg_b);
    CHECK(slurp(std::filesystem::path(out_a) / "consensus/window_0000.json") !=
          slurp(std::filesystem::path(out_b) / "consensus/window_0000.json"));
  }
}

TEST_CASE("experiment: base-only runs score like the baseline") {
  testutil::TempDir dir;
  const auto data_path = write_sinusoid(dir, 420);
  auto j = nlohmann::json::parse(minimal_config(data_path, (dir / "out").string()));
  j["levels"] = {{{"kind", "base"}}};
  const auto cfg = experiment::ExperimentConfig::from_json_text(j.dump());
  const auto summary = experiment::run_experiment(cfg);

  REQUIRE(summary.consensus_scores.rows.size() == 1);
  REQUIRE(summary.baseline_scores.rows.size() == 1);
  CHECK(summary.consensus_scores.rows[0].crps ==
        doctest::Approx(summary.baseline_scores.rows[0].crps).epsilon(1e-4));
  CHECK(summary.consensus_scores.rows[0].mae ==
        doctest::Approx(summary.baseline_scores.rows[0].mae).epsilon(1e-6));
}

TEST_CASE("experiment: missing data file is a data error") {
  testutil::TempDir dir;
  const auto cfg = experiment::ExperimentConfig::from_json_text(
      minimal_config((dir / "absent.csv").string(), (dir / "out").string()));
  CHECK_THROWS_AS(experiment::run_experiment(cfg), DataError);
}
