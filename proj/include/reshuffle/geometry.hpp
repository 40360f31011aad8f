#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "reshuffle/random.hpp"

namespace reshuffle {

// Closed convex feasible set with an exact Euclidean projection. Three kinds:
// the whole space, a norm ball, an axis-aligned box. Projection is the only
// way iterates interact with the set, so it must be exact, not iterative.
class ConvexSet {
 public:
  enum class Kind { full_space, ball, box };

  static ConvexSet full_space() { return ConvexSet(Kind::full_space); }

  static ConvexSet ball(Eigen::VectorXd center, double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
      throw std::invalid_argument("ConvexSet::ball: radius must be positive and finite");
    }
    ConvexSet s(Kind::ball);
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  static ConvexSet origin_ball(int dim, double radius) {
    return ball(Eigen::VectorXd::Zero(dim), radius);
  }

  static ConvexSet box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    if (lower.size() != upper.size()) {
      throw std::invalid_argument("ConvexSet::box: bound dimensions differ");
    }
    if (((upper - lower).array() < 0.0).any()) {
      throw std::invalid_argument("ConvexSet::box: requires lower <= upper coordinatewise");
    }
    ConvexSet s(Kind::box);
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
  }

  Kind kind() const { return kind_; }
  bool is_bounded() const { return kind_ != Kind::full_space; }

  // Ambient dimension; -1 for the whole space (any dimension admitted).
  int dimension() const {
    switch (kind_) {
      case Kind::full_space: return -1;
      case Kind::ball: return static_cast<int>(center_.size());
      case Kind::box: return static_cast<int>(lower_.size());
    }
    return -1;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    switch (kind_) {
      case Kind::full_space:
        return x;
      case Kind::ball: {
        check_dim(x);
        const Eigen::VectorXd shift = x - center_;
        const double norm = shift.norm();
        if (norm <= radius_) return x;
        return center_ + (radius_ / norm) * shift;
      }
      case Kind::box:
        check_dim(x);
        return x.cwiseMax(lower_).cwiseMin(upper_);
    }
    throw std::logic_error("ConvexSet::project: unreachable");
  }

  double diameter() const {
    switch (kind_) {
      case Kind::full_space: return std::numeric_limits<double>::infinity();
      case Kind::ball: return 2.0 * radius_;
      case Kind::box: return (upper_ - lower_).norm();
    }
    throw std::logic_error("ConvexSet::diameter: unreachable");
  }

  bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const {
    switch (kind_) {
      case Kind::full_space:
        return true;
      case Kind::ball:
        check_dim(x);
        return (x - center_).norm() <= radius_ * (1.0 + tol) + tol;
      case Kind::box:
        check_dim(x);
        return ((x - lower_).array() >= -tol).all() && ((upper_ - x).array() >= -tol).all();
    }
    return false;
  }

  // Uniform sample from a bounded set. Errors for the whole space.
  Eigen::VectorXd sample(RandomStream& stream) const {
    switch (kind_) {
      case Kind::full_space:
        throw std::logic_error("ConvexSet::sample: full space has no uniform law");
      case Kind::ball: {
        const int d = dimension();
        Eigen::VectorXd dir(d);
        double norm = 0.0;
        do {
          for (int j = 0; j < d; ++j) dir[j] = stream.next_normal();
          norm = dir.norm();
        } while (norm == 0.0);
        const double r = radius_ * std::pow(stream.next_double(), 1.0 / static_cast<double>(d));
        return center_ + (r / norm) * dir;
      }
      case Kind::box: {
        Eigen::VectorXd x(lower_.size());
        for (int j = 0; j < lower_.size(); ++j) {
          x[j] = lower_[j] + (upper_[j] - lower_[j]) * stream.next_double();
        }
        return x;
      }
    }
    throw std::logic_error("ConvexSet::sample: unreachable");
  }

  const Eigen::VectorXd& center() const { require(Kind::ball, "center"); return center_; }
  double radius() const { require(Kind::ball, "radius"); return radius_; }
  const Eigen::VectorXd& lower() const { require(Kind::box, "lower"); return lower_; }
  const Eigen::VectorXd& upper() const { require(Kind::box, "upper"); return upper_; }

 private:
  explicit ConvexSet(Kind kind) : kind_(kind) {}

  void check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != dimension()) {
      throw std::invalid_argument("ConvexSet: point dimension does not match the set");
    }
  }

  void require(Kind k, const char* what) const {
    if (kind_ != k) {
      throw std::logic_error(std::string("ConvexSet: accessor '") + what + "' undefined for this kind");
    }
  }

  Kind kind_;
  Eigen::VectorXd center_;
  double radius_ = 0.0;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

}  // namespace reshuffle
