#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "reshuffle/coupling.hpp"
#include "reshuffle/geometry.hpp"
#include "reshuffle/optimizer.hpp"
#include "reshuffle/problems.hpp"
#include "reshuffle/random.hpp"

namespace reshuffle {

// Factory call in declarative form; n is supplied by the grid (or the spec's
// own n field for single-instance runs).
struct ProblemSpec {
  std::string kind = "least_squares";  // least_squares | logistic
  int n = 0;
  int d = 2;
  double kappa = 1.0;   // least squares: Gram spectral-ratio target
  double lambda = 0.1;  // logistic: ridge weight
  double radius = 1.0;
  std::uint64_t seed = 0;
};

struct SetSpec {
  std::string kind = "ball";  // ball | box | full_space
  double radius = 1.0;
  double lower = -1.0;  // box bounds, replicated across coordinates
  double upper = 1.0;
};

inline FiniteSumProblem build_problem(const ProblemSpec& spec, int n) {
  if (spec.kind == "least_squares") {
    return make_least_squares(n, spec.d, spec.kappa, spec.radius, spec.seed);
  }
  if (spec.kind == "logistic") {
    return make_logistic(n, spec.d, spec.lambda, spec.radius, spec.seed);
  }
  throw std::invalid_argument("build_problem: unknown kind '" + spec.kind + "'");
}

inline ConvexSet build_set(const SetSpec& spec, int d) {
  if (spec.kind == "ball") return ConvexSet::origin_ball(d, spec.radius);
  if (spec.kind == "full_space") return ConvexSet::full_space();
  if (spec.kind == "box") {
    return ConvexSet::box(Eigen::VectorXd::Constant(d, spec.lower),
                          Eigen::VectorXd::Constant(d, spec.upper));
  }
  throw std::invalid_argument("build_set: unknown kind '" + spec.kind + "'");
}

struct GridSpec {
  std::vector<int> n_values;
  std::vector<int> K_values;
};

struct ExperimentConfig {
  ProblemSpec problem;
  SetSpec set;
  std::vector<Algorithm> algorithms = {Algorithm::sgdo, Algorithm::sgd};
  StepRegime regime = StepRegime::thm2();
  GridSpec grid;
  std::vector<std::uint64_t> seeds;
  AveragingScheme averaging = AveragingScheme::tail_epoch_starts;
  bool thm3_check = false;
};

// One row of the sweep table; exactly the serialized CSV columns.
struct SweepCell {
  std::string algorithm;
  int n = 0;
  int K = 0;
  double alpha = 0.0;
  std::string regime;
  bool in_regime = false;
  double mean_subopt = 0.0;
  double se_subopt = 0.0;
  int seeds = 0;

  bool operator==(const SweepCell&) const = default;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::uint64_t seed_offset = 0;
  std::vector<SweepCell> cells;
  std::map<int, RateConstants> constants;          // per n
  std::map<int, ProblemDescriptor> descriptors;    // per n
  std::map<std::string, long> diverged_runs;       // "algorithm/n/K" -> count
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double stderr_slope = 0.0;
  int points = 0;
};

// Log-log least squares of value against budget: log y = slope log x + b.
// Nonpositive values are rejected since the model lives on logs.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw std::invalid_argument("fit_rate: needs at least 2 points");
  const int m = static_cast<int>(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) {
      throw std::invalid_argument("fit_rate: points must be strictly positive");
    }
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double det = m * sxx - sx * sx;
  if (!(std::abs(det) > 1e-12 * std::max(1.0, m * sxx))) {
    throw std::invalid_argument("fit_rate: degenerate abscissae");
  }
  RateFit fit;
  fit.points = m;
  fit.slope = (m * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / m;

  double ssr = 0.0, sst = 0.0;
  const double ybar = sy / m;
  for (const auto& [x, y] : points) {
    const double ly = std::log(y);
    const double res = ly - (fit.slope * std::log(x) + fit.intercept);
    ssr += res * res;
    sst += (ly - ybar) * (ly - ybar);
  }
  fit.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  if (m > 2) {
    const double sigma_sq = ssr / (m - 2);
    fit.stderr_slope = std::sqrt(sigma_sq * m / det);
  }
  return fit;
}

namespace detail {

inline void parallel_for(long count, int jobs, const std::function<void(long)>& body) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || count <= 1) {
    for (long idx = 0; idx < count; ++idx) body(idx);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const long idx = next.fetch_add(1);
          if (idx >= count) return;
          body(idx);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
        next.store(count);
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

// Runs the full (algorithm x n x K x seed) grid. Work items fill preassigned
// slots and the reduction walks them in a fixed order, so the result is
// byte-identical for any job count. seed_offset shifts every seed, giving
// disjoint replications without touching the config.
inline ExperimentResult run_sweep(const ExperimentConfig& config, int jobs = 1,
                                  std::uint64_t seed_offset = 0) {
  if (config.grid.n_values.empty() || config.grid.K_values.empty()) {
    throw std::invalid_argument("run_sweep: grid must not be empty");
  }
  if (config.seeds.empty()) throw std::invalid_argument("run_sweep: needs at least one seed");
  if (config.algorithms.empty()) {
    throw std::invalid_argument("run_sweep: needs at least one algorithm");
  }

  ExperimentResult result;
  result.config = config;
  result.seed_offset = seed_offset;

  struct Instance {
    FiniteSumProblem problem;
    ConvexSet set;
  };
  std::map<int, Instance> instances;
  for (int n : config.grid.n_values) {
    if (instances.count(n)) continue;
    FiniteSumProblem p = build_problem(config.problem, n);
    ConvexSet set = build_set(config.set, p.d);
    result.constants[n] = rate_constants(p, set);
    result.descriptors[n] = p.descriptor;
    instances.emplace(n, Instance{std::move(p), std::move(set)});
  }

  struct Slot {
    Algorithm algorithm;
    int n, K;
    std::uint64_t seed;
    double subopt = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
  };
  std::vector<Slot> slots;
  for (Algorithm alg : config.algorithms) {
    for (int n : config.grid.n_values) {
      for (int K : config.grid.K_values) {
        for (std::uint64_t seed : config.seeds) {
          slots.push_back({alg, n, K, seed + seed_offset});
        }
      }
    }
  }

  const bool need_sums = config.averaging == AveragingScheme::full_average;
  detail::parallel_for(static_cast<long>(slots.size()), jobs, [&](long idx) {
    Slot& slot = slots[static_cast<std::size_t>(idx)];
    const Instance& inst = instances.at(slot.n);
    const double alpha =
        step_size(config.regime, slot.n, slot.K, result.constants.at(slot.n));
    RecordOptions opts;
    opts.averaging_sums = need_sums;
    const RandomStream stream(slot.seed, 0);
    try {
      Trajectory traj;
      switch (slot.algorithm) {
        case Algorithm::sgdo:
          traj = run_sgdo(inst.problem, inst.set, slot.K, alpha, stream, opts);
          break;
        case Algorithm::sgd:
          traj = run_sgd(inst.problem, inst.set, slot.K, alpha, stream, opts);
          break;
        case Algorithm::gd:
          traj = run_gd(inst.problem, inst.set, slot.K, alpha, opts);
          break;
      }
      slot.subopt = suboptimality(inst.problem, average(traj, config.averaging)).value;
    } catch (const DivergenceError&) {
      slot.diverged = true;
    }
  });

  const std::size_t per_cell = config.seeds.size();
  std::size_t cursor = 0;
  for (Algorithm alg : config.algorithms) {
    for (int n : config.grid.n_values) {
      for (int K : config.grid.K_values) {
        detail::Welford agg;
        long diverged = 0;
        for (std::size_t s = 0; s < per_cell; ++s, ++cursor) {
          const Slot& slot = slots[cursor];
          if (slot.diverged) {
            ++diverged;
          } else {
            agg.add(slot.subopt);
          }
        }
        SweepCell cell;
        cell.algorithm = to_string(alg);
        cell.n = n;
        cell.K = K;
        cell.alpha = step_size(config.regime, n, K, result.constants.at(n));
        cell.regime = to_string(config.regime.kind);
        cell.in_regime = in_regime(config.regime, n, K, result.constants.at(n));
        cell.mean_subopt =
            agg.count() > 0 ? agg.mean() : std::numeric_limits<double>::infinity();
        cell.se_subopt = agg.standard_error();
        cell.seeds = static_cast<int>(agg.count());
        if (diverged > 0) {
          result.diverged_runs[cell.algorithm + "/" + std::to_string(n) + "/" +
                               std::to_string(K)] = diverged;
        }
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

// Fits mean suboptimality against K for one algorithm at fixed n. Cells with
// nonpositive means are dropped; returns nothing when fewer than two remain
// (or than min_points).
inline std::optional<RateFit> fit_rate_over_epochs(const ExperimentResult& result,
                                                   const std::string& algorithm, int n,
                                                   bool in_regime_only = false,
                                                   int min_points = 2) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& cell : result.cells) {
    if (cell.algorithm != algorithm || cell.n != n) continue;
    if (in_regime_only && !cell.in_regime) continue;
    if (cell.mean_subopt > 0.0 && std::isfinite(cell.mean_subopt)) {
      pts.emplace_back(static_cast<double>(cell.K), cell.mean_subopt);
    }
  }
  if (static_cast<int>(pts.size()) < std::max(2, min_points)) return std::nullopt;
  return fit_rate(pts);
}

// Companion fit against n at fixed K, for the component-count scaling. Only
// reported, never hard-asserted; the constants behind it are not pinned.
inline std::optional<RateFit> fit_rate_over_components(const ExperimentResult& result,
                                                       const std::string& algorithm, int K,
                                                       bool in_regime_only = false,
                                                       int min_points = 2) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& cell : result.cells) {
    if (cell.algorithm != algorithm || cell.K != K) continue;
    if (in_regime_only && !cell.in_regime) continue;
    if (cell.mean_subopt > 0.0 && std::isfinite(cell.mean_subopt)) {
      pts.emplace_back(static_cast<double>(cell.n), cell.mean_subopt);
    }
  }
  if (static_cast<int>(pts.size()) < std::max(2, min_points)) return std::nullopt;
  return fit_rate(pts);
}

// Hard rate check for the diameter-step regime: every reshuffled cell must
// satisfy mean_subopt <= D^2 L / (4 n K) + 3 G D / sqrt(n K) with four
// standard errors of slack.
inline BoundReport check_thm3_bound(const ExperimentResult& result) {
  if (result.config.regime.kind != StepRegime::Kind::thm3) {
    throw std::invalid_argument("check_thm3_bound: sweep was not run with the thm3 regime");
  }
  BoundReport report;
  report.check = "thm3_bound";
  for (const auto& cell : result.cells) {
    if (cell.algorithm != "sgdo") continue;
    const RateConstants& c = result.constants.at(cell.n);
    if (!std::isfinite(c.D)) {
      throw std::invalid_argument("check_thm3_bound: needs a bounded feasible set");
    }
    const double nk = static_cast<double>(cell.n) * cell.K;
    const double bound = c.D * c.D * c.L / (4.0 * nk) + 3.0 * c.G * c.D / std::sqrt(nk);
    const double slack = bound + 4.0 * cell.se_subopt;
    ++report.checked;
    if (slack > 0.0) report.max_ratio = std::max(report.max_ratio, cell.mean_subopt / slack);
    if (cell.mean_subopt > slack * (1.0 + 1e-9)) {
      ++report.violations;
      detail::add_witness(report, "thm3", cell.n, cell.K, cell.mean_subopt, slack);
    }
  }
  if (report.checked == 0) {
    throw std::invalid_argument("check_thm3_bound: no reshuffled cells in the result");
  }
  return report;
}

}  // namespace reshuffle
