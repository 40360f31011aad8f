#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "reshuffle/geometry.hpp"
#include "reshuffle/permutation.hpp"
#include "reshuffle/random.hpp"

namespace reshuffle {

struct SuboptimalityRecord {
  double value = 0.0;        // F(x) - F*
  double distance_sq = 0.0;  // ||x - x*||^2
};

// Descriptor is the serializable identity of a problem instance; a seeded
// factory invoked with the same descriptor fields regenerates the instance.
struct ProblemDescriptor {
  std::string kind = "custom";
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;
  double radius = 0.0;  // certification ball for the G bound
  double G = 0.0;
  double L = 0.0;
  double mu = 0.0;
  double kappa = std::numeric_limits<double>::infinity();  // L / mu
  double gram_condition = 0.0;  // least squares: spectral ratio of the mean Gram
  double lambda = 0.0;          // logistic: ridge weight
};

// F(x) = (1/n) sum_i f(x; i) with component oracles indexed 1..n. Constants
// certify: ||grad f(.; i)|| <= G over the certification ball, each component
// L-smooth, F mu-strongly convex (mu = 0 when not certified).
struct FiniteSumProblem {
  int n = 0;
  int d = 0;
  double G = 0.0;
  double L = 0.0;
  double mu = 0.0;
  std::function<double(int, const Eigen::VectorXd&)> component_value;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> component_gradient;
  // When set, full_gradient routes here instead of averaging components.
  // Identical-component problems install the base gradient so a reshuffled
  // pass and a full-gradient pass share bitwise-identical arithmetic.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> full_gradient_override;
  std::optional<Eigen::VectorXd> x_star;
  std::optional<double> f_star;
  ProblemDescriptor descriptor;

  double kappa() const {
    return mu > 0.0 ? L / mu : std::numeric_limits<double>::infinity();
  }

  void require_component(int i) const {
    if (i < 1 || i > n) {
      throw std::out_of_range("FiniteSumProblem: component index outside [1, n]");
    }
  }

  void require_dimension(const Eigen::VectorXd& x) const {
    if (static_cast<int>(x.size()) != d) {
      throw std::invalid_argument("FiniteSumProblem: point dimension != d");
    }
  }

  double component(int i, const Eigen::VectorXd& x) const {
    require_component(i);
    require_dimension(x);
    return component_value(i, x);
  }

  Eigen::VectorXd gradient(int i, const Eigen::VectorXd& x) const {
    require_component(i);
    require_dimension(x);
    return component_gradient(i, x);
  }

  double value(const Eigen::VectorXd& x) const {
    require_dimension(x);
    double sum = 0.0;
    for (int i = 1; i <= n; ++i) sum += component_value(i, x);
    return sum / n;
  }

  Eigen::VectorXd full_gradient(const Eigen::VectorXd& x) const {
    require_dimension(x);
    if (full_gradient_override) return full_gradient_override(x);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    for (int i = 1; i <= n; ++i) g += component_gradient(i, x);
    return g / n;
  }
};

inline SuboptimalityRecord suboptimality(const FiniteSumProblem& problem,
                                         const Eigen::VectorXd& x) {
  if (!problem.x_star || !problem.f_star) {
    throw std::logic_error("suboptimality: problem has no certified optimum");
  }
  SuboptimalityRecord rec;
  rec.value = problem.value(x) - *problem.f_star;
  rec.distance_sq = (x - *problem.x_star).squaredNorm();
  return rec;
}

namespace detail {

// Interior-optimum certificate: the projected-gradient step must be a fixed
// point up to 1e-10 * G.
inline bool certifies_optimum(const FiniteSumProblem& problem, const ConvexSet& set,
                              const Eigen::VectorXd& candidate) {
  const Eigen::VectorXd pg = candidate - set.project(candidate - problem.full_gradient(candidate));
  return pg.norm() <= 1e-10 * std::max(problem.G, 1e-30);
}

inline double stable_softplus(double t) {
  // log(1 + exp(t)) without overflow.
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double logistic_sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace detail

// Least squares components f(x; i) = (1/2) (a_i . x - b_i)^2. Constants:
// L = max_i ||a_i||^2, mu = lambda_min of the mean Gram, and
// G = max_i ||a_i|| (radius ||a_i|| + |b_i|) certified over the origin ball.
// x_star solves the normal equations and is kept only when interior.
inline FiniteSumProblem make_least_squares_from_data(const Eigen::MatrixXd& A,
                                                     const Eigen::VectorXd& b,
                                                     double radius) {
  const int n = static_cast<int>(A.rows());
  const int d = static_cast<int>(A.cols());
  if (n < 1 || d < 1) throw std::invalid_argument("least_squares: need n >= 1 and d >= 1");
  if (static_cast<int>(b.size()) != n) {
    throw std::invalid_argument("least_squares: b size != number of rows");
  }
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("least_squares: radius must be positive and finite");
  }

  auto data = std::make_shared<const Eigen::MatrixXd>(A);
  auto targets = std::make_shared<const Eigen::VectorXd>(b);

  FiniteSumProblem p;
  p.n = n;
  p.d = d;
  p.component_value = [data, targets](int i, const Eigen::VectorXd& x) {
    const double r = data->row(i - 1).dot(x) - (*targets)[i - 1];
    return 0.5 * r * r;
  };
  p.component_gradient = [data, targets](int i, const Eigen::VectorXd& x) {
    const double r = data->row(i - 1).dot(x) - (*targets)[i - 1];
    return Eigen::VectorXd(r * data->row(i - 1).transpose());
  };

  const Eigen::MatrixXd gram = (A.transpose() * A) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("least_squares: Gram eigendecomposition failed");
  }
  const double lam_min = eig.eigenvalues()(0);
  const double lam_max = eig.eigenvalues()(d - 1);

  double max_row_sq = 0.0, max_g = 0.0;
  for (int i = 0; i < n; ++i) {
    const double row_norm = A.row(i).norm();
    max_row_sq = std::max(max_row_sq, row_norm * row_norm);
    max_g = std::max(max_g, row_norm * (radius * row_norm + std::abs(b[i])));
  }
  p.L = max_row_sq;
  p.G = max_g;

  const bool certified_mu = lam_min > 1e-12 * std::max(lam_max, 1.0);
  p.mu = certified_mu ? lam_min : 0.0;

  Eigen::VectorXd candidate;
  if (certified_mu) {
    candidate = gram.ldlt().solve(A.transpose() * b / static_cast<double>(n));
  } else {
    candidate = A.colPivHouseholderQr().solve(b);
  }
  const ConvexSet ball = ConvexSet::origin_ball(d, radius);
  if (candidate.norm() <= radius && detail::certifies_optimum(p, ball, candidate)) {
    p.x_star = candidate;
    p.f_star = p.value(candidate);
  }

  p.descriptor.kind = "least_squares";
  p.descriptor.n = n;
  p.descriptor.d = d;
  p.descriptor.radius = radius;
  p.descriptor.G = p.G;
  p.descriptor.L = p.L;
  p.descriptor.mu = p.mu;
  p.descriptor.kappa = p.kappa();
  p.descriptor.gram_condition =
      certified_mu ? lam_max / lam_min : std::numeric_limits<double>::infinity();
  return p;
}

// Seeded generator with an exact Gram spectrum: singular values of A are
// rescaled so the mean Gram eigenvalues run geometrically from 1 to
// kappa_target. config "kappa" therefore means this spectral ratio; the
// worst-case ratio L / mu is reported separately in the descriptor.
inline FiniteSumProblem make_least_squares(int n, int d, double kappa_target,
                                           double radius, std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("make_least_squares: need n >= 1, d >= 1");
  if (!(kappa_target >= 1.0) || !std::isfinite(kappa_target)) {
    throw std::invalid_argument("make_least_squares: kappa_target must be finite and >= 1");
  }
  if (d > n) {
    throw std::invalid_argument(
        "make_least_squares: d > n is rank deficient, mu > 0 cannot be certified");
  }
  if (d == 1 && kappa_target != 1.0) {
    throw std::invalid_argument(
        "make_least_squares: a 1-dimensional Gram has one eigenvalue; kappa_target must be 1");
  }

  RandomStream root(seed, 0x6c73);  // family tag keeps streams problem-local
  RandomStream s_data = root.substream(0);
  RandomStream s_signal = root.substream(1);
  RandomStream s_noise = root.substream(2);

  Eigen::MatrixXd A0(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) A0(i, j) = s_data.next_normal();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A0, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd spectrum(d);
  for (int j = 0; j < d; ++j) {
    const double t = d == 1 ? 0.0 : static_cast<double>(j) / (d - 1);
    spectrum[j] = std::pow(kappa_target, t);  // mean-Gram eigenvalue
  }
  const Eigen::MatrixXd A =
      svd.matrixU() * (spectrum * static_cast<double>(n)).cwiseSqrt().asDiagonal() *
      svd.matrixV().transpose();

  Eigen::VectorXd x_true(d);
  for (int j = 0; j < d; ++j) x_true[j] = s_signal.next_normal();
  const double norm = x_true.norm();
  if (norm > 0.0) x_true *= std::min(radius / 2.0, 1.0) / norm;

  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = A.row(i).dot(x_true) + 0.1 * s_noise.next_normal();

  FiniteSumProblem p = make_least_squares_from_data(A, b, radius);
  p.descriptor.seed = seed;
  if (!(std::abs(p.descriptor.gram_condition - kappa_target) <= 0.05 * kappa_target)) {
    throw std::logic_error("make_least_squares: Gram spectrum missed the target ratio");
  }
  if (!p.x_star || p.x_star->norm() > 0.95 * radius) {
    throw std::logic_error(
        "make_least_squares: optimum not safely interior; pick another seed or radius");
  }
  return p;
}

// Ridge logistic components
// f(x; i) = log(1 + exp(-y_i a_i . x)) + (lambda/2) ||x||^2 with y_i in {-1, +1}.
// L = lambda + max_i ||a_i||^2 / 4, mu = lambda,
// G = max_i ||a_i|| + lambda * radius over the origin ball.
inline FiniteSumProblem make_logistic_from_data(const Eigen::MatrixXd& A,
                                                const Eigen::VectorXi& y, double lambda,
                                                double radius) {
  const int n = static_cast<int>(A.rows());
  const int d = static_cast<int>(A.cols());
  if (n < 1 || d < 1) throw std::invalid_argument("logistic: need n >= 1 and d >= 1");
  if (static_cast<int>(y.size()) != n) {
    throw std::invalid_argument("logistic: label count != number of rows");
  }
  for (int i = 0; i < n; ++i) {
    if (y[i] != 1 && y[i] != -1) {
      throw std::invalid_argument("logistic: labels must be +1 or -1");
    }
  }
  if (lambda < 0.0) throw std::invalid_argument("logistic: lambda must be >= 0");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("logistic: radius must be positive and finite");
  }

  auto data = std::make_shared<const Eigen::MatrixXd>(A);
  auto labels = std::make_shared<const Eigen::VectorXi>(y);

  FiniteSumProblem p;
  p.n = n;
  p.d = d;
  p.component_value = [data, labels, lambda](int i, const Eigen::VectorXd& x) {
    const double margin = (*labels)[i - 1] * data->row(i - 1).dot(x);
    return detail::stable_softplus(-margin) + 0.5 * lambda * x.squaredNorm();
  };
  p.component_gradient = [data, labels, lambda](int i, const Eigen::VectorXd& x) {
    const double yi = (*labels)[i - 1];
    const double margin = yi * data->row(i - 1).dot(x);
    const double w = detail::logistic_sigmoid(-margin);
    return Eigen::VectorXd(-yi * w * data->row(i - 1).transpose() + lambda * x);
  };

  double max_row = 0.0, max_row_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = A.row(i).norm();
    max_row = std::max(max_row, r);
    max_row_sq = std::max(max_row_sq, r * r);
  }
  p.L = lambda + max_row_sq / 4.0;
  p.mu = lambda;
  p.G = max_row + lambda * radius;

  if (lambda > 0.0) {
    // Damped Newton on F; the ridge term keeps the Hessian uniformly positive.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    for (int it = 0; it < 200; ++it) {
      Eigen::VectorXd grad = lambda * x;
      Eigen::MatrixXd hess = lambda * Eigen::MatrixXd::Identity(d, d);
      for (int i = 0; i < n; ++i) {
        const double yi = y[i];
        const double w = detail::logistic_sigmoid(-yi * A.row(i).dot(x));
        grad += (-yi * w / n) * A.row(i).transpose();
        hess += (w * (1.0 - w) / n) * (A.row(i).transpose() * A.row(i));
      }
      if (grad.norm() <= 1e-13) break;
      const Eigen::VectorXd step = hess.ldlt().solve(grad);
      double t = 1.0;
      const double f0 = p.value(x);
      while (t > 1e-8 && p.value(x - t * step) > f0) t *= 0.5;
      x -= t * step;
    }
    const ConvexSet ball = ConvexSet::origin_ball(d, radius);
    if (x.norm() <= radius && detail::certifies_optimum(p, ball, x)) {
      p.x_star = x;
      p.f_star = p.value(x);
    }
  }

  p.descriptor.kind = "logistic";
  p.descriptor.n = n;
  p.descriptor.d = d;
  p.descriptor.radius = radius;
  p.descriptor.lambda = lambda;
  p.descriptor.G = p.G;
  p.descriptor.L = p.L;
  p.descriptor.mu = p.mu;
  p.descriptor.kappa = p.kappa();
  return p;
}

inline FiniteSumProblem make_logistic(int n, int d, double lambda, double radius,
                                      std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("make_logistic: need n >= 1, d >= 1");
  RandomStream root(seed, 0x6c67);
  RandomStream s_data = root.substream(0);
  RandomStream s_signal = root.substream(1);
  RandomStream s_flip = root.substream(2);

  const double row_scale = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd A(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) A(i, j) = row_scale * s_data.next_normal();
  }
  Eigen::VectorXd w(d);
  for (int j = 0; j < d; ++j) w[j] = s_signal.next_normal();
  if (w.norm() > 0.0) w /= w.norm();

  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    const double score = A.row(i).dot(w) + 0.5 * s_flip.next_normal();
    y[i] = score >= 0.0 ? 1 : -1;
  }

  FiniteSumProblem p = make_logistic_from_data(A, y, lambda, radius);
  p.descriptor.seed = seed;
  return p;
}

// n copies of a single base component. F equals the base objective, and the
// full gradient is the base gradient itself (no averaging loop), so descent
// with any component order reproduces full-gradient descent bit for bit.
inline FiniteSumProblem make_identical_components(const FiniteSumProblem& base, int n) {
  if (base.n != 1) {
    throw std::invalid_argument("make_identical_components: base must have exactly one component");
  }
  if (n < 1) throw std::invalid_argument("make_identical_components: need n >= 1");
  FiniteSumProblem p = base;
  p.n = n;
  const auto value = base.component_value;
  const auto gradient = base.component_gradient;
  p.component_value = [value](int, const Eigen::VectorXd& x) { return value(1, x); };
  p.component_gradient = [gradient](int, const Eigen::VectorXd& x) { return gradient(1, x); };
  p.full_gradient_override = [gradient](const Eigen::VectorXd& x) { return gradient(1, x); };
  p.descriptor.kind = "identical_components";
  p.descriptor.n = n;
  return p;
}

struct AssumptionWitness {
  std::string check;
  int component = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

struct AssumptionReport {
  long samples = 0;
  double max_gradient_ratio = 0.0;      // ||grad f(.;i)|| / G
  double max_smoothness_ratio = 0.0;    // ||dg|| / (L ||dx||)
  double max_cocoercivity_ratio = 0.0;  // ||dg||^2 / (L <dg, dx>)
  double max_convexity_deficit = 0.0;   // normalized lower-bound shortfall
  std::vector<AssumptionWitness> violations;
  bool passed() const { return violations.empty(); }
};

// Samples point pairs and a component per pair from the given bounded set and
// checks the certified constants: gradient bound, per-component smoothness,
// cocoercivity, and mu-strong convexity of F. Almost-sure style tolerance:
// 1e-9 relative.
inline AssumptionReport verify_assumptions(const FiniteSumProblem& problem,
                                           const ConvexSet& set, long num_samples,
                                           std::uint64_t seed) {
  if (!set.is_bounded()) {
    throw std::invalid_argument("verify_assumptions: needs a bounded set to sample from");
  }
  if (set.dimension() != problem.d) {
    throw std::invalid_argument("verify_assumptions: set dimension != problem dimension");
  }
  if (num_samples < 1) throw std::invalid_argument("verify_assumptions: num_samples >= 1");
  if (!(problem.G > 0.0) || !(problem.L > 0.0) || problem.mu < 0.0) {
    throw std::invalid_argument("verify_assumptions: constants must satisfy G > 0, L > 0, mu >= 0");
  }

  constexpr double kRel = 1e-9;
  RandomStream stream(seed, 0x7661);
  AssumptionReport report;
  report.samples = num_samples;

  auto record = [&report](const std::string& check, int i, double lhs, double rhs,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (report.violations.size() < 16) {
      report.violations.push_back({check, i, lhs, rhs, x, y});
    } else {
      report.violations.push_back({check, i, lhs, rhs, {}, {}});
    }
  };

  for (long t = 0; t < num_samples; ++t) {
    const Eigen::VectorXd x = set.sample(stream);
    const Eigen::VectorXd y = set.sample(stream);
    const int i = with_replacement_index(problem.n, stream);

    const Eigen::VectorXd gx = problem.gradient(i, x);
    const Eigen::VectorXd gy = problem.gradient(i, y);

    const double grad_ratio = std::max(gx.norm(), gy.norm()) / problem.G;
    report.max_gradient_ratio = std::max(report.max_gradient_ratio, grad_ratio);
    if (grad_ratio > 1.0 + kRel) {
      record("gradient_bound", i, std::max(gx.norm(), gy.norm()), problem.G, x, y);
    }

    const Eigen::VectorXd dx = x - y;
    const Eigen::VectorXd dg = gx - gy;
    const double dist = dx.norm();
    if (dist > 1e-12) {
      const double smooth_ratio = dg.norm() / (problem.L * dist);
      report.max_smoothness_ratio = std::max(report.max_smoothness_ratio, smooth_ratio);
      if (smooth_ratio > 1.0 + kRel) {
        record("smoothness", i, dg.norm(), problem.L * dist, x, y);
      }

      const double lhs = dg.squaredNorm();
      const double rhs = problem.L * dg.dot(dx);
      const double scale = problem.L * problem.L * dx.squaredNorm();
      if (lhs > rhs * (1.0 + kRel) + kRel * scale) {
        record("cocoercivity", i, lhs, rhs, x, y);
      }
      if (rhs > 0.0) {
        report.max_cocoercivity_ratio = std::max(report.max_cocoercivity_ratio, lhs / rhs);
      }
    }

    const double fx = problem.value(x);
    const double fy = problem.value(y);
    const Eigen::VectorXd fgx = problem.full_gradient(x);
    const double lower = fx + fgx.dot(y - x) + 0.5 * problem.mu * dx.squaredNorm();
    const double scale = std::max({1.0, std::abs(fx), std::abs(fy)});
    const double deficit = (lower - fy) / scale;
    report.max_convexity_deficit = std::max(report.max_convexity_deficit, deficit);
    if (deficit > kRel) {
      record("strong_convexity", 0, lower, fy, x, y);
    }
  }
  return report;
}

}  // namespace reshuffle
