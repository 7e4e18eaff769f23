#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <random>
#include <vector>

#include "concord/aggregates.hpp"
#include "concord/consensus.hpp"
#include "concord/errors.hpp"

using namespace concord;

namespace {

consensus::LevelForecastInput base_level(const std::vector<double>& mu,
                                         const std::vector<double>& sigma, double alpha = 1.0) {
  consensus::LevelForecastInput input;
  input.spec = agg::make_spec(agg::Kind::base, 1);
  input.forecast.level = "base";
  input.forecast.mu = mu;
  input.forecast.sigma = sigma;
  input.alpha = alpha;
  return input;
}

consensus::LevelForecastInput aggregate_level(agg::Kind kind, std::size_t K,
                                              const std::vector<double>& mu,
                                              const std::vector<double>& sigma, double alpha) {
  consensus::LevelForecastInput input;
  input.spec = agg::make_spec(kind, K);
  input.forecast.level = input.spec.name;
  input.forecast.mu = mu;
  input.forecast.sigma = sigma;
  input.alpha = alpha;
  return input;
}

/// The quadratic mean objective, evaluated directly from the entries.
double mean_objective(const consensus::Problem& problem, const Eigen::VectorXd& mu) {
  double total = 0.0;
  for (const auto& e : problem.entries) {
    const auto dense = e.weight.dense();
    double dot = 0.0;
    for (std::size_t t = 0; t < dense.size(); ++t) dot += dense[t] * mu(t);
    const double r = dot - e.target_mean;
    total += e.alpha * r * r / (e.target_std * e.target_std);
  }
  return total;
}

}  // namespace

TEST_CASE("consensus: problem assembly tiles every level") {
  SUBCASE("base level only") {
    const auto problem =
        consensus::build_problem(std::vector{base_level({1, 2, 3}, {1, 1, 1})}, 3, 2);
    CHECK(problem.entries.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(problem.entries[t].weight.offset == t);
      CHECK(problem.entries[t].weight.K() == 1);
    }
  }
  SUBCASE("base plus average") {
    const std::vector<consensus::LevelForecastInput> levels = {
        base_level({1, 2, 3, 4}, {1, 1, 1, 1}),
        aggregate_level(agg::Kind::average, 2, {1.5, 3.5}, {0.5, 0.5}, 10.0)};
    const auto problem = consensus::build_problem(levels, 4, 1);
    CHECK(problem.entries.size() == 6);
  }
  SUBCASE("aggregate-only problems are accepted when windows cover the horizon") {
    const std::vector<consensus::LevelForecastInput> levels = {
        aggregate_level(agg::Kind::average, 2, {1.0, 2.0}, {1.0, 1.0}, 1.0)};
    CHECK_NOTHROW(consensus::build_problem(levels, 4, 1));
  }
  SUBCASE("forecast horizon must match R/K") {
    const std::vector<consensus::LevelForecastInput> levels = {
        base_level({1, 2, 3}, {1, 1, 1})};
    CHECK_THROWS_AS(consensus::build_problem(levels, 4, 1), DataError);
  }
  SUBCASE("R must be divisible by K") {
    const std::vector<consensus::LevelForecastInput> levels = {
        aggregate_level(agg::Kind::average, 2, {1.0}, {1.0}, 1.0)};
    CHECK_THROWS_AS(consensus::build_problem(levels, 3, 1), ConfigError);
  }
  SUBCASE("nonpositive target spread is rejected") {
    auto level = base_level({1, 2}, {1, 0});
    CHECK_THROWS_AS(consensus::build_problem(std::vector{level}, 2, 1), DataError);
  }
}

TEST_CASE("consensus: mean solver is exact on the base-only problem") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> mu_d(0.0, 5.0);
  std::uniform_real_distribution<double> sd_d(0.1, 3.0);
  std::vector<double> mu(16), sigma(16);
  for (std::size_t t = 0; t < mu.size(); ++t) {
    mu[t] = mu_d(rng);
    sigma[t] = sd_d(rng);
  }
  const auto problem = consensus::build_problem(std::vector{base_level(mu, sigma)}, 16, 0);
  const auto solved = consensus::solve_mean(problem);
  for (std::size_t t = 0; t < mu.size(); ++t) {
    CHECK(solved(t) == doctest::Approx(mu[t]).epsilon(1e-12));
  }
}

TEST_CASE("consensus: mean solver matches the hand-solved two-level problem") {
  // Base targets [1,3] with unit spreads; an average-of-two target of 3.
  const std::vector<consensus::LevelForecastInput> levels = {
      base_level({1.0, 3.0}, {1.0, 1.0}),
      aggregate_level(agg::Kind::average, 2, {3.0}, {1.0}, 1.0)};
  const auto problem = consensus::build_problem(levels, 2, 0);
  const auto mu = consensus::solve_mean(problem);
  CHECK(mu(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(mu(1) == doctest::Approx(10.0 / 3.0).epsilon(1e-12));

  SUBCASE("overwhelming aggregate weight pins the constraint") {
    auto heavy = levels;
    heavy[1].alpha = 1e8;
    const auto pinned = consensus::solve_mean(consensus::build_problem(heavy, 2, 0));
    CHECK((pinned(0) + pinned(1)) / 2.0 == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(pinned(0) == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(pinned(1) == doctest::Approx(4.0).epsilon(1e-5));
  }
}

TEST_CASE("consensus: solved mean beats random perturbations") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d(0.0, 1.0);
  std::uniform_real_distribution<double> sd_d(0.2, 2.0);

  std::vector<double> mu(6), sigma(6), avg_mu(3), avg_sd(3);
  for (auto& x : mu) x = 3.0 * d(rng);
  for (auto& x : sigma) x = sd_d(rng);
  for (auto& x : avg_mu) x = 3.0 * d(rng);
  for (auto& x : avg_sd) x = sd_d(rng);
  const std::vector<consensus::LevelForecastInput> levels = {
      base_level(mu, sigma), aggregate_level(agg::Kind::average, 2, avg_mu, avg_sd, 10.0)};
  const auto problem = consensus::build_problem(levels, 6, 0);
  const auto solved = consensus::solve_mean(problem);
  const double at_min = mean_objective(problem, solved);

  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd perturbed = solved;
    for (int t = 0; t < perturbed.size(); ++t) perturbed(t) += 0.01 * d(rng);
    CHECK(at_min <= mean_objective(problem, perturbed) + 1e-12);
  }
}

TEST_CASE("consensus: mean is scale equivariant") {
  const std::vector<consensus::LevelForecastInput> levels = {
      base_level({1.0, 3.0, -2.0, 0.5}, {1.0, 0.5, 2.0, 1.0}),
      aggregate_level(agg::Kind::average, 2, {2.5, -1.0}, {0.3, 0.4}, 10.0)};
  const auto mu1 = consensus::solve_mean(consensus::build_problem(levels, 4, 0));

  const double c = -7.5;
  auto scaled = levels;
  for (auto& level : scaled) {
    for (auto& m : level.forecast.mu) m *= c;
  }
  const auto mu2 = consensus::solve_mean(consensus::build_problem(scaled, 4, 0));
  for (int t = 0; t < mu1.size(); ++t) {
    CHECK(mu2(t) == doctest::Approx(c * mu1(t)).epsilon(1e-9));
  }
}

TEST_CASE("consensus: alpha rescaling leaves the mean unchanged") {
  const std::vector<consensus::LevelForecastInput> levels = {
      base_level({0.4, -1.2, 2.2, 0.0}, {1.0, 1.5, 0.7, 1.1}),
      aggregate_level(agg::Kind::halfdiff, 2, {0.5, 0.25}, {0.2, 0.3}, 2.0)};
  const auto mu1 = consensus::solve_mean(consensus::build_problem(levels, 4, 0));
  auto scaled = levels;
  for (auto& level : scaled) level.alpha *= 137.0;
  const auto mu2 = consensus::solve_mean(consensus::build_problem(scaled, 4, 0));
  for (int t = 0; t < mu1.size(); ++t) {
    CHECK(mu2(t) == doctest::Approx(mu1(t)).epsilon(1e-9));
  }
}

TEST_CASE("consensus: degenerate mean problems are diagnosed") {
  // A trend-only level never pins the window level: the all-ones direction
  // is in the kernel of the normal equations.
  const std::vector<consensus::LevelForecastInput> levels = {
      aggregate_level(agg::Kind::trend, 2, {0.5}, {1.0}, 1.0)};
  const auto problem = consensus::build_problem(levels, 2, 0);
  CHECK_THROWS_AS(consensus::solve_mean(problem), NumericalError);
}

TEST_CASE("consensus: covariance recovers base spreads at the identity fixed point") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> sd_d(0.1, 3.0);
  std::vector<double> mu(8, 0.0), sigma(8);
  for (auto& s : sigma) s = sd_d(rng);

  const auto problem = consensus::build_problem(std::vector{base_level(mu, sigma)}, 8, 4);
  consensus::OptimizerConfig cfg;
  cfg.seed = 2;
  consensus::Diagnostics diag;
  const auto [sd, V] = consensus::solve_covariance(problem, cfg, &diag);
  for (std::size_t t = 0; t < 8; ++t) {
    const double marginal = sd(t) * sd(t) + V.row(static_cast<int>(t)).squaredNorm();
    CHECK(marginal == doctest::Approx(sigma[t] * sigma[t]).epsilon(1e-5));
  }
}

TEST_CASE("consensus: covariance achieves a negative implied correlation") {
  // Two unit-variance steps whose average is far more certain: the implied
  // covariance between the steps must come out near -0.8.
  const std::vector<consensus::LevelForecastInput> levels = {
      base_level({0.0, 0.0}, {1.0, 1.0}),
      aggregate_level(agg::Kind::average, 2, {0.0}, {std::sqrt(0.1)}, 1.0)};
  const auto problem = consensus::build_problem(levels, 2, 1);
  consensus::OptimizerConfig cfg;
  cfg.seed = 4;
  consensus::Diagnostics diag;
  const auto [sd, V] = consensus::solve_covariance(problem, cfg, &diag);

  const double s1 = sd(0) * sd(0) + V.row(0).squaredNorm();
  const double s2 = sd(1) * sd(1) + V.row(1).squaredNorm();
  const double c = V.row(0).dot(V.row(1));
  CHECK(s1 == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(s2 == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(c == doctest::Approx(-0.8).epsilon(2.5e-2));
  CHECK((s1 + s2 + 2 * c) / 4.0 == doctest::Approx(0.1).epsilon(1e-3));

  SUBCASE("a diagonal-only covariance cannot express it") {
    auto diag_problem = problem;
    diag_problem.rank = 0;
    consensus::Diagnostics diag0;
    consensus::solve_covariance(diag_problem, cfg, &diag0);
    CHECK(diag0.objective > diag.objective + 0.1);
  }
}

TEST_CASE("consensus: covariance objective trace is non-increasing") {
  const std::vector<consensus::LevelForecastInput> levels = {
      base_level({0, 0, 0, 0}, {1.0, 2.0, 0.5, 1.5}),
      aggregate_level(agg::Kind::average, 2, {0, 0}, {0.4, 0.6}, 10.0)};
  const auto problem = consensus::build_problem(levels, 4, 2);
  consensus::OptimizerConfig cfg;
  cfg.seed = 9;
  cfg.record_trace = true;
  consensus::Diagnostics diag;
  consensus::solve_covariance(problem, cfg, &diag);
  REQUIRE(diag.trace.size() > 1);
  for (std::size_t i = 1; i < diag.trace.size(); ++i) {
    CHECK(diag.trace[i] <= diag.trace[i - 1] + 1e-12);
  }
}

TEST_CASE("consensus: fitted spreads match targets when no entries conflict") {
  // One average entry per disjoint pair: every target can be met exactly.
  const std::vector<consensus::LevelForecastInput> levels = {
      aggregate_level(agg::Kind::average, 2, {1.0, -1.0, 0.5}, {0.7, 1.3, 0.4}, 1.0)};
  const auto problem = consensus::build_problem(levels, 6, 1);
  consensus::OptimizerConfig cfg;
  cfg.seed = 31;
  consensus::Diagnostics diag;
  const auto [sd, V] = consensus::solve_covariance(problem, cfg, &diag);

  consensus::ConsensusDistribution dist;
  dist.mu = Eigen::VectorXd::Zero(6);
  dist.sigma = sd;
  dist.V = V;
  const auto tiles = agg::tile_horizon(agg::make_spec(agg::Kind::average, 2), 6);
  const double targets[] = {0.49, 1.69, 0.16};
  for (std::size_t j = 0; j < 3; ++j) {
    const auto q = consensus::marginalize(dist, tiles[j]);
    CHECK(q.variance == doctest::Approx(targets[j]).epsilon(1e-4));
  }
}

TEST_CASE("consensus: marginalization identities") {
  consensus::ConsensusDistribution dist;
  dist.mu = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
  dist.sigma = Eigen::VectorXd::Constant(4, 2.0);
  dist.V = Eigen::MatrixXd::Zero(4, 2);
  dist.V(0, 0) = 1.0;
  dist.V(1, 0) = -1.0;
  dist.V(2, 1) = 0.5;

  SUBCASE("unit vector picks one step") {
    const std::vector<double> e2 = {0, 0, 1, 0};
    const auto q = consensus::marginalize(dist, e2);
    CHECK(q.mean == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(q.variance == doctest::Approx(4.25).epsilon(1e-15));
  }
  SUBCASE("zero weights give a zero-variance point mass at zero") {
    const std::vector<double> zero = {0, 0, 0, 0};
    const auto q = consensus::marginalize(dist, zero);
    CHECK(q.mean == 0.0);
    CHECK(q.variance == 0.0);
  }
  SUBCASE("random weights agree with the dense quadratic form") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> d(0.0, 1.0);
    const Eigen::MatrixXd cov = consensus::dense_covariance(dist);
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd a(4);
      for (int t = 0; t < 4; ++t) a(t) = d(rng);
      const std::vector<double> weights(a.data(), a.data() + 4);
      const auto q = consensus::marginalize(dist, weights);
      const double dense = a.transpose() * cov * a;
      CHECK(q.variance == doctest::Approx(dense).epsilon(1e-10));
      CHECK(q.mean == doctest::Approx(a.dot(dist.mu)).epsilon(1e-10));
    }
  }
}

TEST_CASE("consensus: dense covariance reconstruction") {
  consensus::ConsensusDistribution dist;
  dist.mu = Eigen::VectorXd::Zero(2);
  dist.sigma = Eigen::VectorXd::Ones(2);
  dist.V = Eigen::MatrixXd::Ones(2, 1);

  const auto cov = consensus::dense_covariance(dist);
  CHECK(cov(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cov(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cov(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cov(1, 1) == doctest::Approx(2.0).epsilon(1e-15));

  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  CHECK(llt.info() == Eigen::Success);

  SUBCASE("rank zero gives a diagonal matrix") {
    dist.V = Eigen::MatrixXd::Zero(2, 0);
    const auto d = consensus::dense_covariance(dist);
    CHECK(d(0, 1) == 0.0);
    CHECK(d(0, 0) == 1.0);
  }
}

TEST_CASE("consensus: full reconciliation reproduces a lone base forecast") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> mu_d(0.0, 2.0);
  std::uniform_real_distribution<double> sd_d(0.3, 2.5);
  std::vector<double> mu(8), sigma(8);
  for (std::size_t t = 0; t < 8; ++t) {
    mu[t] = mu_d(rng);
    sigma[t] = sd_d(rng);
  }
  consensus::OptimizerConfig cfg;
  cfg.seed = 3;
  const auto dist =
      consensus::reconcile(std::vector{base_level(mu, sigma)}, 8, 4, cfg);
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK(dist.mu(static_cast<int>(t)) == doctest::Approx(mu[t]).epsilon(1e-12));
    const std::vector<double> unit = [&] {
      std::vector<double> u(8, 0.0);
      u[t] = 1.0;
      return u;
    }();
    const auto q = consensus::marginalize(dist, unit);
    CHECK(q.variance == doctest::Approx(sigma[t] * sigma[t]).epsilon(1e-5));
  }
}

TEST_CASE("consensus: queries outside any jointly constrained block are flagged") {
  const std::vector<consensus::LevelForecastInput> levels = {
      base_level({0, 0, 0, 0}, {1, 1, 1, 1}),
      aggregate_level(agg::Kind::average, 2, {0, 0}, {1, 1}, 1.0)};
  consensus::OptimizerConfig cfg;
  cfg.max_iterations = 200;
  const auto dist = consensus::reconcile(levels, 4, 1, cfg);

  // Steps 0 and 1 share an average window; steps 1 and 2 never co-occur.
  const auto inside = consensus::marginalize(dist, std::vector<double>{0.5, 0.5, 0, 0});
  CHECK(inside.jointly_constrained);
  const auto across = consensus::marginalize(dist, std::vector<double>{0, 0.5, 0.5, 0});
  CHECK_FALSE(across.jointly_constrained);
  const auto single = consensus::marginalize(dist, std::vector<double>{0, 0, 0, 1.0});
  CHECK(single.jointly_constrained);
}

TEST_CASE("consensus: distribution JSON round trip") {
  consensus::ConsensusDistribution dist;
  dist.mu = Eigen::VectorXd::LinSpaced(3, -1.0, 1.0);
  dist.sigma = Eigen::VectorXd::Constant(3, 0.5);
  dist.V = Eigen::MatrixXd::Zero(3, 2);
  dist.V(0, 0) = 0.25;
  dist.V(2, 1) = -0.125;
  dist.diagnostics.objective = -1.5;
  dist.diagnostics.iterations = 42;
  dist.diagnostics.grad_norm = 3e-8;
  dist.diagnostics.converged = true;
  dist.support_blocks = {{0, 2}, {2, 1}};
  dist.window_index = 3;
  dist.target_begin = 96;

  const auto back = consensus::from_json(consensus::to_json(dist));
  CHECK((back.mu.array() == dist.mu.array()).all());
  CHECK((back.sigma.array() == dist.sigma.array()).all());
  CHECK((back.V.array() == dist.V.array()).all());
  CHECK(back.diagnostics.objective == dist.diagnostics.objective);
  CHECK(back.diagnostics.iterations == dist.diagnostics.iterations);
  CHECK(back.diagnostics.grad_norm == dist.diagnostics.grad_norm);
  CHECK(back.diagnostics.converged == dist.diagnostics.converged);
  CHECK(back.support_blocks == dist.support_blocks);
  CHECK(back.window_index == 3);
  CHECK(back.target_begin == 96);

  CHECK_THROWS_AS(consensus::from_json("{not json"), DataError);
  CHECK_THROWS_AS(consensus::from_json("{\"R\": 2}"), DataError);
}
