#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reshuffle/geometry.hpp"
#include "reshuffle/permutation.hpp"
#include "reshuffle/problems.hpp"
#include "reshuffle/random.hpp"

namespace reshuffle {

enum class Algorithm { sgdo, sgd, gd };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::sgdo: return "sgdo";
    case Algorithm::sgd: return "sgd";
    case Algorithm::gd: return "gd";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "sgdo") return Algorithm::sgdo;
  if (s == "sgd") return Algorithm::sgd;
  if (s == "gd") return Algorithm::gd;
  throw std::invalid_argument("algorithm_from_string: unknown algorithm '" + s + "'");
}

// Step-size policies. thm1 targets the strongly convex many-epoch regime,
// thm2 caps it at 2/L for small K, thm3 is the non-strongly-convex rate with
// a diameter-dependent step. l >= 1 tunes the logarithmic factor.
struct StepRegime {
  enum class Kind { thm1, thm2, thm3, explicit_alpha };
  Kind kind = Kind::explicit_alpha;
  double l = 1.0;
  double alpha = 0.0;

  static StepRegime thm1(double l = 1.0) { return {Kind::thm1, l, 0.0}; }
  static StepRegime thm2(double l = 1.0) { return {Kind::thm2, l, 0.0}; }
  static StepRegime thm3() { return {Kind::thm3, 1.0, 0.0}; }
  static StepRegime explicit_alpha(double alpha) {
    return {Kind::explicit_alpha, 1.0, alpha};
  }
};

inline const char* to_string(StepRegime::Kind k) {
  switch (k) {
    case StepRegime::Kind::thm1: return "thm1";
    case StepRegime::Kind::thm2: return "thm2";
    case StepRegime::Kind::thm3: return "thm3";
    case StepRegime::Kind::explicit_alpha: return "explicit";
  }
  return "?";
}

struct RateConstants {
  double G = 0.0;
  double L = 0.0;
  double mu = 0.0;
  double D = std::numeric_limits<double>::infinity();
};

inline RateConstants rate_constants(const FiniteSumProblem& problem, const ConvexSet& set) {
  return {problem.G, problem.L, problem.mu, set.diameter()};
}

inline double step_size(const StepRegime& regime, int n, int K, const RateConstants& c) {
  if (n < 1 || K < 1) throw std::invalid_argument("step_size: need n >= 1 and K >= 1");
  const double nk = static_cast<double>(n) * static_cast<double>(K);
  switch (regime.kind) {
    case StepRegime::Kind::thm1: {
      if (!(c.mu > 0.0)) throw std::invalid_argument("step_size: thm1 needs mu > 0");
      if (!(regime.l >= 1.0)) throw std::invalid_argument("step_size: need l >= 1");
      if (nk < 2.0) throw std::invalid_argument("step_size: thm1 needs n*K >= 2");
      return 4.0 * regime.l * std::log(nk) / (c.mu * nk);
    }
    case StepRegime::Kind::thm2: {
      if (!(c.L > 0.0)) throw std::invalid_argument("step_size: thm2 needs L > 0");
      return std::min(2.0 / c.L, step_size(StepRegime::thm1(regime.l), n, K, c));
    }
    case StepRegime::Kind::thm3: {
      if (!(c.L > 0.0) || !(c.G > 0.0)) {
        throw std::invalid_argument("step_size: thm3 needs G > 0 and L > 0");
      }
      if (!std::isfinite(c.D) || !(c.D > 0.0)) {
        throw std::invalid_argument("step_size: thm3 needs a bounded feasible set");
      }
      return std::min(2.0 / c.L, c.D / (c.G * std::sqrt(nk)));
    }
    case StepRegime::Kind::explicit_alpha: {
      if (!(regime.alpha > 0.0) || !std::isfinite(regime.alpha)) {
        throw std::invalid_argument("step_size: explicit alpha must be positive and finite");
      }
      return regime.alpha;
    }
  }
  throw std::logic_error("step_size: unreachable");
}

// Epoch-count hypothesis of the strongly convex rate: K > 32 l kappa^2 ln(nK).
inline bool in_regime(const StepRegime& regime, int n, int K, const RateConstants& c) {
  switch (regime.kind) {
    case StepRegime::Kind::thm1:
    case StepRegime::Kind::thm2: {
      if (!(c.mu > 0.0)) return false;
      const double kappa = c.L / c.mu;
      const double nk = static_cast<double>(n) * static_cast<double>(K);
      return static_cast<double>(K) > 32.0 * regime.l * kappa * kappa * std::log(nk);
    }
    case StepRegime::Kind::thm3:
      return std::isfinite(c.D);
    case StepRegime::Kind::explicit_alpha:
      return true;
  }
  return false;
}

// Smallest K satisfying the thm1 gate, by fixed-point iteration on
// K = floor(32 l kappa^2 ln(nK)) + 1; the map grows logarithmically, so the
// iteration settles in a handful of rounds.
inline long thm1_min_epochs(int n, double kappa, double l = 1.0) {
  if (n < 1 || !(kappa >= 1.0) || !(l >= 1.0)) {
    throw std::invalid_argument("thm1_min_epochs: need n >= 1, kappa >= 1, l >= 1");
  }
  const double c = 32.0 * l * kappa * kappa;
  long K = 2;
  for (int round = 0; round < 256; ++round) {
    const long next =
        static_cast<long>(std::floor(c * std::log(static_cast<double>(n) * K))) + 1;
    if (next == K) return K;
    K = std::max<long>(next, 2);
  }
  throw std::runtime_error("thm1_min_epochs: fixed point did not settle");
}

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, int step)
      : std::runtime_error("iterate diverged at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step)),
        epoch_(epoch),
        step_(step) {}
  int epoch() const { return epoch_; }
  int step() const { return step_; }

 private:
  int epoch_;
  int step_;
};

struct RecordOptions {
  bool averaging_sums = false;  // maintain O(d) running sums for full averages
  bool dense_scalars = false;   // per-step suboptimality records; needs x_star
};

// One run of a method. Epoch starts x_0^1 .. x_0^{K+1} are always kept
// (the last entry is the final iterate); per-step state is only summarized,
// never retained as vectors.
struct Trajectory {
  Algorithm algorithm = Algorithm::sgdo;
  int n = 0;
  int K = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::vector<Eigen::VectorXd> epoch_starts;
  std::vector<SuboptimalityRecord> dense_log;  // x_i^k for i < n, all k
  bool has_averaging_sums = false;
  Eigen::VectorXd iterate_sum;  // sum of x_i^k over i = 0..n-1, k = 1..K
  long iterate_count = 0;

  const Eigen::VectorXd& last_iterate() const { return epoch_starts.back(); }
  const Eigen::VectorXd& epoch_start(int k) const {
    if (k < 1 || k > K + 1) throw std::out_of_range("Trajectory::epoch_start: k outside [1, K+1]");
    return epoch_starts[static_cast<std::size_t>(k - 1)];
  }
};

enum class AveragingScheme { tail_epoch_starts, full_average, last_iterate };

inline const char* to_string(AveragingScheme s) {
  switch (s) {
    case AveragingScheme::tail_epoch_starts: return "tail_epoch_starts";
    case AveragingScheme::full_average: return "full_average";
    case AveragingScheme::last_iterate: return "last_iterate";
  }
  return "?";
}

inline AveragingScheme averaging_from_string(const std::string& s) {
  if (s == "tail_epoch_starts") return AveragingScheme::tail_epoch_starts;
  if (s == "full_average") return AveragingScheme::full_average;
  if (s == "last_iterate") return AveragingScheme::last_iterate;
  throw std::invalid_argument("averaging_from_string: unknown scheme '" + s + "'");
}

inline Eigen::VectorXd average(const Trajectory& traj, AveragingScheme scheme) {
  switch (scheme) {
    case AveragingScheme::tail_epoch_starts: {
      const int first = (traj.K + 1) / 2;  // ceil(K/2)
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(traj.epoch_starts.front().size());
      for (int k = first; k <= traj.K; ++k) sum += traj.epoch_start(k);
      return sum / static_cast<double>(traj.K - first + 1);
    }
    case AveragingScheme::full_average: {
      if (!traj.has_averaging_sums) {
        throw std::logic_error("average: trajectory was run without averaging sums");
      }
      return traj.iterate_sum / static_cast<double>(traj.iterate_count);
    }
    case AveragingScheme::last_iterate:
      return traj.last_iterate();
  }
  throw std::logic_error("average: unreachable");
}

namespace detail {

// The single projected descent step shared by every runner; bit-identical
// arithmetic across methods is what the equivalence guarantees rest on.
inline Eigen::VectorXd projected_step(const ConvexSet& set, const Eigen::VectorXd& x,
                                      double alpha, const Eigen::VectorXd& g) {
  return set.project(x - alpha * g);
}

inline void check_finite(const Eigen::VectorXd& x, int epoch, int step) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12) {
    throw DivergenceError(epoch, step);
  }
}

inline void validate_run(const FiniteSumProblem& problem, const ConvexSet& set, int K,
                         double alpha, const std::optional<Eigen::VectorXd>& start) {
  if (problem.n < 1 || problem.d < 1) {
    throw std::invalid_argument("run: problem must have n >= 1 and d >= 1");
  }
  if (K < 1) throw std::invalid_argument("run: need K >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("run: alpha must be positive and finite");
  }
  if (set.is_bounded() && set.dimension() != problem.d) {
    throw std::invalid_argument("run: set dimension != problem dimension");
  }
  if (start && static_cast<int>(start->size()) != problem.d) {
    throw std::invalid_argument("run: start dimension != problem dimension");
  }
}

struct StepRecorder {
  Trajectory* traj;
  const FiniteSumProblem* problem;
  RecordOptions opts;

  void init(int d) {
    if (opts.dense_scalars && (!problem->x_star || !problem->f_star)) {
      throw std::logic_error("run: dense recording needs a certified optimum");
    }
    if (opts.averaging_sums) {
      traj->has_averaging_sums = true;
      traj->iterate_sum = Eigen::VectorXd::Zero(d);
    }
  }

  // Called with x_i^k before the step that consumes it.
  void before_step(const Eigen::VectorXd& x) {
    if (opts.averaging_sums) {
      traj->iterate_sum += x;
      ++traj->iterate_count;
    }
    if (opts.dense_scalars) traj->dense_log.push_back(suboptimality(*problem, x));
  }
};

}  // namespace detail

// Reshuffled pass: epoch k draws one permutation from stream.substream(k) and
// sweeps it in order. x_0^{k+1} = x_n^k; the start is projected onto the set.
inline Trajectory run_sgdo(const FiniteSumProblem& problem, const ConvexSet& set, int K,
                           double alpha, const RandomStream& stream,
                           RecordOptions opts = {},
                           const std::optional<Eigen::VectorXd>& start = std::nullopt) {
  detail::validate_run(problem, set, K, alpha, start);
  Trajectory traj{Algorithm::sgdo, problem.n, K, alpha, stream.seed(), stream.stream_id()};
  detail::StepRecorder rec{&traj, &problem, opts};
  rec.init(problem.d);

  Eigen::VectorXd x = set.project(start.value_or(Eigen::VectorXd::Zero(problem.d)));
  traj.epoch_starts.reserve(static_cast<std::size_t>(K) + 1);
  traj.epoch_starts.push_back(x);
  for (int k = 1; k <= K; ++k) {
    RandomStream epoch_stream = stream.substream(static_cast<std::uint64_t>(k));
    const Permutation sigma = uniform_permutation(problem.n, epoch_stream);
    for (int i = 0; i < problem.n; ++i) {
      rec.before_step(x);
      x = detail::projected_step(set, x, alpha, problem.gradient(sigma.at(i + 1), x));
      detail::check_finite(x, k, i);
    }
    traj.epoch_starts.push_back(x);
  }
  return traj;
}

// With-replacement baseline under the same epoch bookkeeping: K blocks of n
// independent uniform component draws.
inline Trajectory run_sgd(const FiniteSumProblem& problem, const ConvexSet& set, int K,
                          double alpha, const RandomStream& stream, RecordOptions opts = {},
                          const std::optional<Eigen::VectorXd>& start = std::nullopt) {
  detail::validate_run(problem, set, K, alpha, start);
  Trajectory traj{Algorithm::sgd, problem.n, K, alpha, stream.seed(), stream.stream_id()};
  detail::StepRecorder rec{&traj, &problem, opts};
  rec.init(problem.d);

  Eigen::VectorXd x = set.project(start.value_or(Eigen::VectorXd::Zero(problem.d)));
  traj.epoch_starts.reserve(static_cast<std::size_t>(K) + 1);
  traj.epoch_starts.push_back(x);
  for (int k = 1; k <= K; ++k) {
    RandomStream epoch_stream = stream.substream(static_cast<std::uint64_t>(k));
    for (int i = 0; i < problem.n; ++i) {
      rec.before_step(x);
      const int idx = with_replacement_index(problem.n, epoch_stream);
      x = detail::projected_step(set, x, alpha, problem.gradient(idx, x));
      detail::check_finite(x, k, i);
    }
    traj.epoch_starts.push_back(x);
  }
  return traj;
}

// Deterministic full-gradient descent for T steps; every iterate is an epoch
// boundary (n = 1 bookkeeping).
inline Trajectory run_gd(const FiniteSumProblem& problem, const ConvexSet& set, int T,
                         double alpha, RecordOptions opts = {},
                         const std::optional<Eigen::VectorXd>& start = std::nullopt) {
  detail::validate_run(problem, set, T, alpha, start);
  Trajectory traj{Algorithm::gd, 1, T, alpha, 0, 0};
  detail::StepRecorder rec{&traj, &problem, opts};
  rec.init(problem.d);

  Eigen::VectorXd x = set.project(start.value_or(Eigen::VectorXd::Zero(problem.d)));
  traj.epoch_starts.reserve(static_cast<std::size_t>(T) + 1);
  traj.epoch_starts.push_back(x);
  for (int t = 1; t <= T; ++t) {
    rec.before_step(x);
    x = detail::projected_step(set, x, alpha, problem.full_gradient(x));
    detail::check_finite(x, t, 0);
    traj.epoch_starts.push_back(x);
  }
  return traj;
}

// Single reshuffled epoch under an explicit permutation; returns all n + 1
// iterates including the (projected) start. The coupling checks live on this.
inline std::vector<Eigen::VectorXd> epoch_path(const FiniteSumProblem& problem,
                                               const ConvexSet& set,
                                               const Eigen::VectorXd& start, double alpha,
                                               const Permutation& sigma) {
  detail::validate_run(problem, set, 1, alpha, start);
  if (sigma.size() != problem.n) {
    throw std::invalid_argument("epoch_path: permutation size != n");
  }
  std::vector<Eigen::VectorXd> path;
  path.reserve(static_cast<std::size_t>(problem.n) + 1);
  path.push_back(set.project(start));
  for (int i = 0; i < problem.n; ++i) {
    const Eigen::VectorXd& x = path.back();
    path.push_back(detail::projected_step(set, x, alpha, problem.gradient(sigma.at(i + 1), x)));
    detail::check_finite(path.back(), 1, i);
  }
  return path;
}

}  // namespace reshuffle
