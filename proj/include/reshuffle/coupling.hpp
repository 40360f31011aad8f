#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "reshuffle/geometry.hpp"
#include "reshuffle/optimizer.hpp"
#include "reshuffle/permutation.hpp"
#include "reshuffle/problems.hpp"
#include "reshuffle/random.hpp"

namespace reshuffle {

// Two reshuffled epochs driven from one shared start under two permutations.
struct CoupledPair {
  Permutation sigma;
  Permutation sigma_prime;
  Eigen::VectorXd shared_start;
  double alpha = 0.0;
};

struct BoundWitness {
  std::string tag;
  long sample = -1;
  int i = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct BoundReport {
  std::string check;
  int n = 0;  // instance context; m = 0 when the report spans a whole sweep
  int d = 0;
  double alpha = 0.0;
  long m = 0;
  long checked = 0;
  long violations = 0;
  double max_ratio = 0.0;  // worst lhs / rhs over positive denominators
  std::vector<BoundWitness> witnesses;
  bool passed() const { return violations == 0; }
};

struct WassersteinReport {
  int n = 0;
  int d = 0;
  double alpha = 0.0;
  int i = 0;
  int r = 0;
  long m = 0;
  long violations = 0;   // per-sample coupling distances beyond the bound
  double max_ratio = 0.0;
  double estimate = 0.0;  // sqrt of the mean squared coupling distance
  double bound = 0.0;     // 2 alpha G
};

struct BiasReport {
  int n = 0;
  int d = 0;
  double alpha = 0.0;
  int i = 0;
  long m = 0;
  double bias = 0.0;  // |mean of F(x_i) - f(x_i; sigma(i+1))|
  double bound = 0.0; // 2 alpha G^2
  double standard_error = 0.0;
  bool within_bound = false;
};

namespace detail {

// All per-step coupling guarantees assume the contraction hypothesis.
inline void require_coupling_step(const FiniteSumProblem& problem, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("coupling: alpha must be positive and finite");
  }
  if (alpha > 2.0 / problem.L * (1.0 + 1e-12)) {
    throw std::invalid_argument("coupling: needs alpha <= 2 / L");
  }
}

// Almost-sure inequalities carry only floating-point slack.
constexpr double kRelTol = 1e-9;

inline void add_witness(BoundReport& report, std::string tag, long sample, int i,
                        double lhs, double rhs) {
  if (report.witnesses.size() < 16) {
    report.witnesses.push_back({std::move(tag), sample, i, lhs, rhs});
  }
}

class Welford {
 public:
  void add(double v) {
    ++count_;
    const double delta = v - mean_;
    mean_ += delta / count_;
    m2_ += delta * (v - mean_);
  }
  long count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const { return count_ > 1 ? m2_ / (count_ - 1) : 0.0; }
  double standard_error() const {
    return count_ > 0 ? std::sqrt(variance() / count_) : 0.0;
  }

 private:
  long count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace detail

inline std::pair<std::vector<Eigen::VectorXd>, std::vector<Eigen::VectorXd>>
run_coupled_epoch(const FiniteSumProblem& problem, const ConvexSet& set,
                  const CoupledPair& pair) {
  if (pair.sigma.size() != problem.n || pair.sigma_prime.size() != problem.n) {
    throw std::invalid_argument("run_coupled_epoch: permutation size != n");
  }
  detail::require_coupling_step(problem, pair.alpha);
  return {epoch_path(problem, set, pair.shared_start, pair.alpha, pair.sigma),
          epoch_path(problem, set, pair.shared_start, pair.alpha, pair.sigma_prime)};
}

// Almost-sure stability: two reshuffled paths from one start satisfy
// ||x_i(sigma) - x_i(sigma')|| <= 2 G alpha #{j <= i : sigma(j) != sigma'(j)}
// at every prefix i. Pairs of independent uniform permutations are drawn per
// sample; starts cycle through the given list (projected onto the set).
inline BoundReport stability_report(const FiniteSumProblem& problem, const ConvexSet& set,
                                    const std::vector<Eigen::VectorXd>& starts,
                                    double alpha, long num_pairs,
                                    const RandomStream& stream) {
  if (starts.empty()) throw std::invalid_argument("stability_report: needs at least one start");
  if (num_pairs < 1) throw std::invalid_argument("stability_report: num_pairs >= 1");
  detail::require_coupling_step(problem, alpha);

  BoundReport report;
  report.check = "stability";
  report.n = problem.n;
  report.d = problem.d;
  report.alpha = alpha;
  report.m = num_pairs;
  for (long s = 0; s < num_pairs; ++s) {
    RandomStream sub = stream.substream(static_cast<std::uint64_t>(s));
    CoupledPair pair;
    pair.sigma = uniform_permutation(problem.n, sub);
    pair.sigma_prime = uniform_permutation(problem.n, sub);
    pair.shared_start = starts[static_cast<std::size_t>(s % starts.size())];
    pair.alpha = alpha;
    const auto [path, path_prime] = run_coupled_epoch(problem, set, pair);
    for (int i = 1; i <= problem.n; ++i) {
      const double lhs = (path[static_cast<std::size_t>(i)] -
                          path_prime[static_cast<std::size_t>(i)]).norm();
      const double rhs =
          2.0 * problem.G * alpha * mismatch_count(pair.sigma, pair.sigma_prime, i);
      ++report.checked;
      if (rhs > 0.0) report.max_ratio = std::max(report.max_ratio, lhs / rhs);
      if (lhs > rhs * (1.0 + detail::kRelTol)) {
        ++report.violations;
        detail::add_witness(report, "stability", s, i, lhs, rhs);
      }
    }
  }
  return report;
}

// Couples the unconditioned epoch against the law conditioned on
// sigma(i+1) = r via the single-swap pushforward. The coupling cost after i
// steps is at most 2 alpha G per sample, so the transport estimate
// sqrt(mean ||x_i - x_i'||^2) obeys the same bound; exceeding it (beyond
// floating-point slack) throws, since the inequality is almost sure.
inline WassersteinReport wasserstein_coupling_bound(const FiniteSumProblem& problem,
                                                    const ConvexSet& set,
                                                    const Eigen::VectorXd& start,
                                                    double alpha, int i, int r, long m,
                                                    const RandomStream& stream) {
  if (i < 0 || i > problem.n - 1) {
    throw std::invalid_argument("wasserstein_coupling_bound: i outside [0, n-1]");
  }
  if (r < 1 || r > problem.n) {
    throw std::invalid_argument("wasserstein_coupling_bound: r outside [1, n]");
  }
  if (m < 1) throw std::invalid_argument("wasserstein_coupling_bound: m >= 1");
  detail::require_coupling_step(problem, alpha);

  WassersteinReport report;
  report.n = problem.n;
  report.d = problem.d;
  report.alpha = alpha;
  report.i = i;
  report.r = r;
  report.m = m;
  report.bound = 2.0 * alpha * problem.G;

  const Eigen::VectorXd x0 = set.project(start);
  double sum_sq = 0.0;
  for (long s = 0; s < m; ++s) {
    RandomStream sub = stream.substream(static_cast<std::uint64_t>(s));
    const Permutation sigma = uniform_permutation(problem.n, sub);
    const Permutation swapped = lambda_op(sigma, r, i);
    Eigen::VectorXd y = x0;
    Eigen::VectorXd z = x0;
    for (int j = 0; j < i; ++j) {
      y = detail::projected_step(set, y, alpha, problem.gradient(sigma.at(j + 1), y));
      z = detail::projected_step(set, z, alpha, problem.gradient(swapped.at(j + 1), z));
    }
    const double dist = (y - z).norm();
    sum_sq += dist * dist;
    if (report.bound > 0.0) {
      report.max_ratio = std::max(report.max_ratio, dist / report.bound);
    }
    if (dist > report.bound * (1.0 + detail::kRelTol)) ++report.violations;
  }
  report.estimate = std::sqrt(sum_sq / static_cast<double>(m));
  if (report.estimate > report.bound * (1.0 + detail::kRelTol)) {
    throw std::runtime_error("wasserstein_coupling_bound: transport estimate exceeded 2 alpha G");
  }
  return report;
}

// Monte Carlo check that the sampled component's loss tracks the full
// objective along the epoch: |E F(x_i) - E f(x_i; sigma(i+1))| <= 2 alpha G^2.
// Paired per-sample differences give the standard error.
inline BiasReport bias_estimate(const FiniteSumProblem& problem, const ConvexSet& set,
                                const Eigen::VectorXd& start, double alpha, int i, long m,
                                const RandomStream& stream) {
  if (i < 0 || i > problem.n - 1) {
    throw std::invalid_argument("bias_estimate: i outside [0, n-1]");
  }
  if (m < 30) {
    throw std::invalid_argument("bias_estimate: insufficient samples, need m >= 30");
  }
  detail::require_coupling_step(problem, alpha);

  const Eigen::VectorXd x0 = set.project(start);
  detail::Welford diff;
  for (long s = 0; s < m; ++s) {
    RandomStream sub = stream.substream(static_cast<std::uint64_t>(s));
    const Permutation sigma = uniform_permutation(problem.n, sub);
    Eigen::VectorXd y = x0;
    for (int j = 0; j < i; ++j) {
      y = detail::projected_step(set, y, alpha, problem.gradient(sigma.at(j + 1), y));
    }
    diff.add(problem.value(y) - problem.component(sigma.at(i + 1), y));
  }

  BiasReport report;
  report.n = problem.n;
  report.d = problem.d;
  report.alpha = alpha;
  report.i = i;
  report.m = m;
  report.bias = std::abs(diff.mean());
  report.bound = 2.0 * alpha * problem.G * problem.G;
  report.standard_error = diff.standard_error();
  report.within_bound = report.bias <= report.bound + 4.0 * report.standard_error;
  return report;
}

// Within-epoch drift bounds, checked in expectation with 4-standard-error
// slack at every prefix length:
//   E ||x_i - x_0||^2    <= 5 i alpha^2 G^2 + 2 i alpha (F(x_0) - F*)
//   E ||x_i - x*||^2     <= ||x_0 - x*||^2 + 5 i alpha^2 G^2
inline BoundReport temporal_regularity_report(const FiniteSumProblem& problem,
                                              const ConvexSet& set,
                                              const Eigen::VectorXd& start, double alpha,
                                              long m, const RandomStream& stream) {
  if (m < 2) throw std::invalid_argument("temporal_regularity_report: m >= 2");
  detail::require_coupling_step(problem, alpha);
  if (!problem.x_star || !problem.f_star) {
    throw std::logic_error("temporal_regularity_report: needs a certified optimum");
  }

  const Eigen::VectorXd x0 = set.project(start);
  const double start_gap = problem.value(x0) - *problem.f_star;
  const double start_dist_sq = (x0 - *problem.x_star).squaredNorm();
  const int n = problem.n;

  std::vector<detail::Welford> disp(static_cast<std::size_t>(n) + 1);
  std::vector<detail::Welford> dist(static_cast<std::size_t>(n) + 1);
  for (long s = 0; s < m; ++s) {
    RandomStream sub = stream.substream(static_cast<std::uint64_t>(s));
    const Permutation sigma = uniform_permutation(n, sub);
    Eigen::VectorXd y = x0;
    disp[0].add(0.0);
    dist[0].add(start_dist_sq);
    for (int i = 1; i <= n; ++i) {
      y = detail::projected_step(set, y, alpha, problem.gradient(sigma.at(i), y));
      disp[static_cast<std::size_t>(i)].add((y - x0).squaredNorm());
      dist[static_cast<std::size_t>(i)].add((y - *problem.x_star).squaredNorm());
    }
  }

  BoundReport report;
  report.check = "temporal_regularity";
  report.n = problem.n;
  report.d = problem.d;
  report.alpha = alpha;
  report.m = m;
  const double drift = 5.0 * alpha * alpha * problem.G * problem.G;
  for (int i = 0; i <= n; ++i) {
    const auto& w_disp = disp[static_cast<std::size_t>(i)];
    const auto& w_dist = dist[static_cast<std::size_t>(i)];
    const double disp_bound = drift * i + 2.0 * i * alpha * start_gap;
    const double dist_bound = start_dist_sq + drift * i;
    const double disp_slack = disp_bound + 4.0 * w_disp.standard_error();
    const double dist_slack = dist_bound + 4.0 * w_dist.standard_error();

    ++report.checked;
    if (disp_slack > 0.0) {
      report.max_ratio = std::max(report.max_ratio, w_disp.mean() / disp_slack);
    }
    if (w_disp.mean() > disp_slack * (1.0 + detail::kRelTol)) {
      ++report.violations;
      detail::add_witness(report, "displacement", -1, i, w_disp.mean(), disp_slack);
    }

    ++report.checked;
    if (dist_slack > 0.0) {
      report.max_ratio = std::max(report.max_ratio, w_dist.mean() / dist_slack);
    }
    if (w_dist.mean() > dist_slack * (1.0 + detail::kRelTol)) {
      ++report.violations;
      detail::add_witness(report, "distance", -1, i, w_dist.mean(), dist_slack);
    }
  }
  return report;
}

}  // namespace reshuffle
