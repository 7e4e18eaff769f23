#include "concord/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "concord/errors.hpp"
#include "concord/rng.hpp"

namespace concord::consensus {

namespace {

std::string join_indices(const std::vector<std::size_t>& indices) {
  std::ostringstream out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0) out << ", ";
    out << indices[i];
  }
  return out.str();
}

}  // namespace

void Problem::validate() const {
  if (R == 0) throw ConfigError("consensus: horizon R must be positive");
  if (rank > R) throw ConfigError("consensus: rank k must not exceed R");
  if (entries.empty()) throw ConfigError("consensus: problem has no entries");

  std::vector<bool> covered(R, false);
  for (const Entry& e : entries) {
    if (e.weight.horizon != R) {
      throw DataError("consensus: entry weight horizon does not match R");
    }
    if (e.weight.window.empty() || e.weight.offset + e.weight.K() > R) {
      throw DataError("consensus: entry support exceeds the horizon");
    }
    if (!(e.alpha > 0.0) || !std::isfinite(e.alpha)) {
      throw ConfigError("consensus: entry alpha must be positive and finite");
    }
    if (!(e.target_std > 0.0) || !std::isfinite(e.target_std) || !std::isfinite(e.target_mean)) {
      throw DataError("consensus: entry targets must be finite with positive spread");
    }
    for (std::size_t r = 0; r < e.weight.K(); ++r) covered[e.weight.offset + r] = true;
  }
  std::vector<std::size_t> uncovered;
  for (std::size_t t = 0; t < R; ++t) {
    if (!covered[t]) uncovered.push_back(t);
  }
  if (!uncovered.empty()) {
    throw ConfigError("consensus: horizon indices not covered by any entry: " +
                      join_indices(uncovered));
  }
}

Problem build_problem(std::span<const LevelForecastInput> levels, std::size_t R,
                      std::size_t rank) {
  if (levels.empty()) throw ConfigError("consensus: at least one level is required");
  Problem problem;
  problem.R = R;
  problem.rank = rank;
  for (const LevelForecastInput& level : levels) {
    const auto tiles = agg::tile_horizon(level.spec, R);
    if (level.forecast.horizon() != tiles.size()) {
      throw DataError("consensus: level '" + level.spec.name + "' supplies " +
                      std::to_string(level.forecast.horizon()) + " forecast steps, expected " +
                      std::to_string(tiles.size()));
    }
    for (std::size_t j = 0; j < tiles.size(); ++j) {
      Entry entry;
      entry.weight = tiles[j];
      entry.target_mean = level.forecast.mu[j];
      entry.target_std = level.forecast.sigma[j];
      entry.alpha = level.alpha;
      entry.level = level.spec.name;
      entry.window_j = j + 1;
      problem.entries.push_back(std::move(entry));
    }
  }
  problem.validate();
  return problem;
}

Eigen::VectorXd solve_mean(const Problem& problem) {
  problem.validate();
  const std::size_t R = problem.R;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(R, R);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(R);

  for (const Entry& e : problem.entries) {
    const double c = e.alpha / (e.target_std * e.target_std);
    const std::size_t o = e.weight.offset;
    const auto& w = e.weight.window;
    for (std::size_t r = 0; r < w.size(); ++r) {
      b(o + r) += c * e.target_mean * w[r];
      for (std::size_t r2 = 0; r2 < w.size(); ++r2) {
        M(o + r, o + r2) += c * w[r] * w[r2];
      }
    }
  }

  // Rank detection must not rely on the residual: a singular system whose
  // right hand side happens to lie in the range of M solves cleanly yet the
  // mean would not be unique.
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (lu.rank() < static_cast<Eigen::Index>(R)) {
    const Eigen::MatrixXd kernel = lu.kernel();
    std::vector<std::size_t> degenerate;
    for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
      Eigen::Index worst = 0;
      kernel.col(c).cwiseAbs().maxCoeff(&worst);
      degenerate.push_back(static_cast<std::size_t>(worst));
    }
    std::sort(degenerate.begin(), degenerate.end());
    degenerate.erase(std::unique(degenerate.begin(), degenerate.end()), degenerate.end());
    throw NumericalError(
        "solve_mean: normal equations are singular; the entry weights leave horizon "
        "directions unconstrained near indices: " +
        join_indices(degenerate));
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  Eigen::VectorXd mu = ldlt.solve(b);
  const double b_scale = std::max(b.lpNorm<Eigen::Infinity>(), 1e-300);
  double residual = (M * mu - b).lpNorm<Eigen::Infinity>() / b_scale;
  for (int pass = 0; pass < 3 && residual > 1e-13; ++pass) {
    mu += ldlt.solve(b - M * mu);
    residual = (M * mu - b).lpNorm<Eigen::Infinity>() / b_scale;
  }

  if (!mu.allFinite() || residual > 1e-9) {
    throw NumericalError("solve_mean: normal equations too ill-conditioned, relative residual " +
                         std::to_string(residual));
  }
  return mu;
}

namespace {

/// Entry view with precomputed constants for the covariance objective.
struct CovEntry {
  std::size_t offset;
  const std::vector<double>* w;
  double alpha;
  double inv_two_var;  // alpha / (2 target_std^2), premultiplied
  double coeff_log;    // alpha * log_coeff
};

struct CovState {
  Eigen::VectorXd rho;  // log per-step std
  Eigen::MatrixXd V;
};

constexpr double kRhoClamp = 300.0;

/// Objective only. Returns +inf when any implied variance overflows or
/// collapses, which makes the line search back off.
double cov_objective(const std::vector<CovEntry>& entries, const Eigen::VectorXd& sig2,
                     const Eigen::MatrixXd& V) {
  double f = 0.0;
  const std::size_t k = static_cast<std::size_t>(V.cols());
  Eigen::VectorXd u(k);
  for (const CovEntry& e : entries) {
    const auto& w = *e.w;
    double s = 0.0;
    u.setZero();
    for (std::size_t r = 0; r < w.size(); ++r) {
      const std::size_t t = e.offset + r;
      s += w[r] * w[r] * sig2(t);
      if (k > 0) u.noalias() += w[r] * V.row(t).transpose();
    }
    s += u.squaredNorm();
    if (!(s > 0.0) || !std::isfinite(s)) return std::numeric_limits<double>::infinity();
    f += e.inv_two_var * s - e.coeff_log * std::log(s);
  }
  return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
}

/// Objective and gradient together.
double cov_objective_grad(const std::vector<CovEntry>& entries, const Eigen::VectorXd& sig2,
                          const Eigen::MatrixXd& V, Eigen::VectorXd& grad_rho,
                          Eigen::MatrixXd& grad_V) {
  grad_rho.setZero();
  grad_V.setZero();
  double f = 0.0;
  const std::size_t k = static_cast<std::size_t>(V.cols());
  Eigen::VectorXd u(k);
  for (const CovEntry& e : entries) {
    const auto& w = *e.w;
    double s = 0.0;
    u.setZero();
    for (std::size_t r = 0; r < w.size(); ++r) {
      const std::size_t t = e.offset + r;
      s += w[r] * w[r] * sig2(t);
      if (k > 0) u.noalias() += w[r] * V.row(t).transpose();
    }
    s += u.squaredNorm();
    if (!(s > 0.0) || !std::isfinite(s)) return std::numeric_limits<double>::infinity();
    f += e.inv_two_var * s - e.coeff_log * std::log(s);

    const double ds = e.inv_two_var - e.coeff_log / s;  // dF/ds
    for (std::size_t r = 0; r < w.size(); ++r) {
      const std::size_t t = e.offset + r;
      grad_rho(t) += ds * w[r] * w[r] * 2.0 * sig2(t);
      if (k > 0) grad_V.row(t).noalias() += (2.0 * ds * w[r]) * u.transpose();
    }
  }
  return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
}

Eigen::VectorXd initial_rho(const Problem& problem) {
  const std::size_t R = problem.R;
  Eigen::VectorXd unit_sum = Eigen::VectorXd::Zero(R);
  Eigen::VectorXd unit_count = Eigen::VectorXd::Zero(R);
  Eigen::VectorXd implied_sum = Eigen::VectorXd::Zero(R);
  Eigen::VectorXd implied_count = Eigen::VectorXd::Zero(R);

  for (const Entry& e : problem.entries) {
    const auto& w = e.weight.window;
    const double var = e.target_std * e.target_std;
    if (w.size() == 1) {
      const std::size_t t = e.weight.offset;
      unit_sum(t) += var / (w[0] * w[0]);
      unit_count(t) += 1.0;
    } else {
      double wsq = 0.0;
      for (const double wr : w) wsq += wr * wr;
      for (std::size_t r = 0; r < w.size(); ++r) {
        implied_sum(e.weight.offset + r) += var / wsq;
        implied_count(e.weight.offset + r) += 1.0;
      }
    }
  }

  Eigen::VectorXd rho(R);
  for (std::size_t t = 0; t < R; ++t) {
    const double var = unit_count(t) > 0.0 ? unit_sum(t) / unit_count(t)
                                           : implied_sum(t) / implied_count(t);
    rho(t) = 0.5 * std::log(var);
  }
  return rho;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixXd> solve_covariance(const Problem& problem,
                                                             const OptimizerConfig& config,
                                                             Diagnostics* diagnostics) {
  problem.validate();
  if (!(config.tolerance > 0.0)) throw ConfigError("consensus: tolerance must be positive");
  if (!(config.initial_step > 0.0)) throw ConfigError("consensus: initial step must be positive");
  if (!(config.log_coeff > 0.0)) throw ConfigError("consensus: log_coeff must be positive");

  const std::size_t R = problem.R;
  const std::size_t k = problem.rank;

  std::vector<CovEntry> entries;
  entries.reserve(problem.entries.size());
  for (const Entry& e : problem.entries) {
    CovEntry ce;
    ce.offset = e.weight.offset;
    ce.w = &e.weight.window;
    ce.alpha = e.alpha;
    ce.inv_two_var = e.alpha / (2.0 * e.target_std * e.target_std);
    ce.coeff_log = e.alpha * config.log_coeff;
    entries.push_back(ce);
  }

  CovState state;
  state.rho = initial_rho(problem);
  state.V.resize(R, k);
  if (k > 0) {
    auto engine = rng::make_engine(config.seed);
    std::uniform_real_distribution<double> uniform(-config.init_v_scale, config.init_v_scale);
    for (std::size_t t = 0; t < R; ++t) {
      for (std::size_t c = 0; c < k; ++c) state.V(t, c) = uniform(engine);
    }
  }

  Eigen::VectorXd sig2 = (2.0 * state.rho).array().exp();
  Eigen::VectorXd grad_rho(R);
  Eigen::MatrixXd grad_V(R, k);
  double f = cov_objective_grad(entries, sig2, state.V, grad_rho, grad_V);
  if (!std::isfinite(f)) {
    throw NumericalError("solve_covariance: objective not finite at the initial point");
  }

  Diagnostics diag;
  if (config.record_trace) diag.trace.push_back(f);
  double step = config.initial_step;
  bool converged = false;
  std::size_t iter = 0;

  Eigen::VectorXd rho_next(R);
  Eigen::MatrixXd v_next(R, k);
  while (iter < config.max_iterations) {
    double grad_norm = grad_rho.lpNorm<Eigen::Infinity>();
    if (k > 0) grad_norm = std::max(grad_norm, grad_V.lpNorm<Eigen::Infinity>());
    diag.grad_norm = grad_norm;
    if (grad_norm <= config.tolerance) {
      converged = true;
      break;
    }

    // Backtracking on the raw gradient direction: halve until the
    // objective stops increasing, grow the step after every success.
    bool accepted = false;
    while (step > 1e-18) {
      rho_next = (state.rho - step * grad_rho).cwiseMax(-kRhoClamp).cwiseMin(kRhoClamp);
      if (k > 0) v_next = state.V - step * grad_V;
      const Eigen::VectorXd sig2_next = (2.0 * rho_next).array().exp();
      const double f_next = cov_objective(entries, sig2_next, k > 0 ? v_next : state.V);
      if (f_next <= f) {
        state.rho.swap(rho_next);
        if (k > 0) state.V.swap(v_next);
        sig2 = sig2_next;
        f = f_next;
        step *= 1.1;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent at the smallest step: numerically stationary

    ++iter;
    if (config.record_trace) diag.trace.push_back(f);
    f = cov_objective_grad(entries, sig2, state.V, grad_rho, grad_V);
  }

  diag.objective = f;
  diag.iterations = iter;
  diag.converged = converged;
  if (!converged) {
    double grad_norm = grad_rho.lpNorm<Eigen::Infinity>();
    if (k > 0) grad_norm = std::max(grad_norm, grad_V.lpNorm<Eigen::Infinity>());
    diag.grad_norm = grad_norm;
    diag.converged = grad_norm <= config.tolerance;
  }
  if (diagnostics != nullptr) *diagnostics = std::move(diag);

  return {state.rho.array().exp().matrix(), std::move(state.V)};
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> collect_blocks(const Problem& problem) {
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  blocks.reserve(problem.entries.size());
  for (const Entry& e : problem.entries) blocks.emplace_back(e.weight.offset, e.weight.K());
  std::sort(blocks.begin(), blocks.end());
  blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
  // Drop blocks nested inside another block; they add no pair coverage.
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  std::size_t best_end = 0;
  for (const auto& [offset, len] : blocks) {
    if (offset + len > best_end) {
      kept.emplace_back(offset, len);
      best_end = offset + len;
    }
  }
  return kept;
}

bool blocks_cover(const std::vector<std::pair<std::size_t, std::size_t>>& blocks, std::size_t lo,
                  std::size_t hi) {
  for (const auto& [offset, len] : blocks) {
    if (offset <= lo && hi < offset + len) return true;
  }
  return false;
}

}  // namespace

ConsensusDistribution reconcile(const Problem& problem, const OptimizerConfig& config) {
  ConsensusDistribution dist;
  dist.mu = solve_mean(problem);
  auto [sigma, V] = solve_covariance(problem, config, &dist.diagnostics);
  dist.sigma = std::move(sigma);
  dist.V = std::move(V);
  dist.support_blocks = collect_blocks(problem);
  return dist;
}

ConsensusDistribution reconcile(std::span<const LevelForecastInput> levels, std::size_t R,
                                std::size_t rank, const OptimizerConfig& config) {
  return reconcile(build_problem(levels, R, rank), config);
}

QueryResult marginalize(const ConsensusDistribution& dist, const agg::PaddedWeight& weight) {
  if (weight.horizon != dist.R()) {
    throw std::invalid_argument("marginalize: weight horizon does not match the distribution");
  }
  QueryResult out;
  const std::size_t k = dist.rank();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
  double var_diag = 0.0;
  for (std::size_t r = 0; r < weight.K(); ++r) {
    const std::size_t t = weight.offset + r;
    const double w = weight.window[r];
    out.mean += w * dist.mu(t);
    var_diag += w * w * dist.sigma(t) * dist.sigma(t);
    if (k > 0) u.noalias() += w * dist.V.row(t).transpose();
  }
  out.variance = var_diag + u.squaredNorm();
  out.jointly_constrained =
      weight.K() <= 1 || blocks_cover(dist.support_blocks, weight.offset,
                                      weight.offset + weight.K() - 1);
  return out;
}

QueryResult marginalize(const ConsensusDistribution& dist, std::span<const double> weight) {
  if (weight.size() != dist.R()) {
    throw std::invalid_argument("marginalize: weight length does not match the distribution");
  }
  QueryResult out;
  const std::size_t k = dist.rank();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
  double var_diag = 0.0;
  std::size_t lo = dist.R();
  std::size_t hi = 0;
  for (std::size_t t = 0; t < weight.size(); ++t) {
    const double w = weight[t];
    out.mean += w * dist.mu(t);
    var_diag += w * w * dist.sigma(t) * dist.sigma(t);
    if (k > 0) u.noalias() += w * dist.V.row(t).transpose();
    if (w != 0.0) {
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  out.variance = var_diag + u.squaredNorm();
  out.jointly_constrained = lo >= hi || blocks_cover(dist.support_blocks, lo, hi);
  return out;
}

Eigen::MatrixXd dense_covariance(const ConsensusDistribution& dist) {
  if (dist.R() > 4096) {
    throw NumericalError("dense_covariance: refusing to materialize R > 4096 (R = " +
                         std::to_string(dist.R()) + "); use marginalize instead");
  }
  Eigen::MatrixXd cov = dist.V * dist.V.transpose();
  cov.diagonal() += dist.sigma.array().square().matrix();
  return cov;
}

std::string to_json(const ConsensusDistribution& dist) {
  nlohmann::json j;
  j["R"] = dist.R();
  j["k"] = dist.rank();
  j["mu"] = std::vector<double>(dist.mu.data(), dist.mu.data() + dist.mu.size());
  j["sigma"] = std::vector<double>(dist.sigma.data(), dist.sigma.data() + dist.sigma.size());
  auto rows = nlohmann::json::array();
  for (Eigen::Index t = 0; t < dist.V.rows(); ++t) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < dist.V.cols(); ++c) row.push_back(dist.V(t, c));
    rows.push_back(std::move(row));
  }
  j["V"] = std::move(rows);
  j["diagnostics"] = {{"objective", dist.diagnostics.objective},
                      {"iterations", dist.diagnostics.iterations},
                      {"grad_norm", dist.diagnostics.grad_norm},
                      {"converged", dist.diagnostics.converged}};
  auto blocks = nlohmann::json::array();
  for (const auto& [offset, len] : dist.support_blocks) {
    blocks.push_back(nlohmann::json::array({offset, len}));
  }
  j["support_blocks"] = std::move(blocks);
  if (dist.window_index >= 0) {
    j["window"] = {{"index", dist.window_index}, {"target_begin", dist.target_begin}};
  }
  return j.dump(2);
}

ConsensusDistribution from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("consensus JSON: parse failure: ") + e.what());
  }
  ConsensusDistribution dist;
  try {
    const std::size_t R = j.at("R").get<std::size_t>();
    const std::size_t k = j.at("k").get<std::size_t>();
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto sigma = j.at("sigma").get<std::vector<double>>();
    if (mu.size() != R || sigma.size() != R) {
      throw DataError("consensus JSON: mu/sigma lengths do not match R");
    }
    dist.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(R));
    dist.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(R));
    for (const double s : sigma) {
      if (!(s > 0.0)) throw DataError("consensus JSON: sigma entries must be positive");
    }
    dist.V.resize(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(k));
    const auto& rows = j.at("V");
    if (rows.size() != R) throw DataError("consensus JSON: V must have R rows");
    for (std::size_t t = 0; t < R; ++t) {
      const auto row = rows[t].get<std::vector<double>>();
      if (row.size() != k) throw DataError("consensus JSON: V rows must have k entries");
      for (std::size_t c = 0; c < k; ++c) dist.V(t, c) = row[c];
    }
    if (j.contains("diagnostics")) {
      const auto& d = j["diagnostics"];
      dist.diagnostics.objective = d.value("objective", 0.0);
      dist.diagnostics.iterations = d.value("iterations", std::size_t{0});
      dist.diagnostics.grad_norm = d.value("grad_norm", 0.0);
      dist.diagnostics.converged = d.value("converged", false);
    }
    if (j.contains("support_blocks")) {
      for (const auto& block : j["support_blocks"]) {
        dist.support_blocks.emplace_back(block.at(0).get<std::size_t>(),
                                         block.at(1).get<std::size_t>());
      }
    }
    if (j.contains("window")) {
      dist.window_index = j["window"].value("index", -1L);
      dist.target_begin = j["window"].value("target_begin", -1L);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("consensus JSON: malformed document: ") + e.what());
  }
  return dist;
}

}  // namespace concord::consensus
