#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "reshuffle/geometry.hpp"
#include "reshuffle/random.hpp"

using reshuffle::ConvexSet;
using reshuffle::RandomStream;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("ball projection rescales along the ray", "[geometry]") {
  const auto set = ConvexSet::origin_ball(2, 1.0);
  const auto p = set.project(vec2(3.0, 4.0));
  REQUIRE(p[0] == Catch::Approx(0.6).epsilon(1e-14));
  REQUIRE(p[1] == Catch::Approx(0.8).epsilon(1e-14));
  // Interior points are fixed exactly.
  const auto q = vec2(0.25, -0.5);
  REQUIRE(set.project(q) == q);
}

TEST_CASE("box projection clamps coordinatewise", "[geometry]") {
  const auto set = ConvexSet::box(vec2(0.0, 0.0), vec2(3.0, 4.0));
  const auto p = set.project(vec2(-1.0, 10.0));
  REQUIRE(p[0] == 0.0);
  REQUIRE(p[1] == 4.0);
  REQUIRE(set.diameter() == Catch::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("full space is the identity projection with infinite diameter", "[geometry]") {
  const auto set = ConvexSet::full_space();
  const auto x = vec2(1e9, -1e9);
  REQUIRE(set.project(x) == x);
  REQUIRE(std::isinf(set.diameter()));
  REQUIRE_FALSE(set.is_bounded());
  RandomStream s(1, 0);
  REQUIRE_THROWS_AS(set.sample(s), std::logic_error);
}

TEST_CASE("ball diameter and membership", "[geometry]") {
  const auto set = ConvexSet::ball(vec2(1.0, 1.0), 2.0);
  REQUIRE(set.diameter() == 4.0);
  REQUIRE(set.contains(vec2(1.0, 2.9)));
  REQUIRE_FALSE(set.contains(vec2(1.0, 3.5)));
}

TEST_CASE("constructor validation", "[geometry]") {
  REQUIRE_THROWS_AS(ConvexSet::origin_ball(2, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(ConvexSet::origin_ball(2, -1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(ConvexSet::box(vec2(1.0, 0.0), vec2(0.0, 1.0)), std::invalid_argument);
  const auto ball = ConvexSet::origin_ball(2, 1.0);
  Eigen::VectorXd wrong(3);
  wrong << 1, 2, 3;
  REQUIRE_THROWS_AS(ball.project(wrong), std::invalid_argument);
}

TEST_CASE("projection properties hold on random pairs", "[geometry][property]") {
  // Idempotence, membership, and the nonexpansive contract
  // ||P(x) - P(y)|| <= ||x - y|| on random draws.
  RandomStream s(404, 0);
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + static_cast<int>(s.next_below(5));
    ConvexSet set = ConvexSet::full_space();
    const int which = static_cast<int>(s.next_below(3));
    if (which == 1) {
      Eigen::VectorXd c(d);
      for (int j = 0; j < d; ++j) c[j] = 2.0 * s.next_normal();
      set = ConvexSet::ball(c, 0.1 + 3.0 * s.next_double());
    } else if (which == 2) {
      Eigen::VectorXd lo(d), hi(d);
      for (int j = 0; j < d; ++j) {
        const double a = 2.0 * s.next_normal();
        const double b = 2.0 * s.next_normal();
        lo[j] = std::min(a, b);
        hi[j] = std::max(a, b);
      }
      set = ConvexSet::box(lo, hi);
    }
    Eigen::VectorXd x(d), y(d);
    for (int j = 0; j < d; ++j) {
      x[j] = 10.0 * s.next_normal();
      y[j] = 10.0 * s.next_normal();
    }
    const auto px = set.project(x);
    const auto py = set.project(y);
    REQUIRE((set.project(px) - px).norm() <= 1e-12 * (1.0 + px.norm()));
    REQUIRE(set.contains(px, 1e-9));
    REQUIRE((px - py).norm() <= (x - y).norm() * (1.0 + 1e-12) + 1e-12);
  }
}

TEST_CASE("bounded samples respect membership and diameter", "[geometry][property]") {
  RandomStream s(808, 0);
  const auto ball = ConvexSet::ball(vec2(0.5, -0.5), 2.0);
  const auto box = ConvexSet::box(vec2(-1.0, 0.0), vec2(2.0, 0.5));
  for (int t = 0; t < 2000; ++t) {
    const auto u = ball.sample(s);
    const auto v = ball.sample(s);
    REQUIRE(ball.contains(u, 1e-9));
    REQUIRE((u - v).norm() <= ball.diameter() * (1.0 + 1e-12));
    const auto p = box.sample(s);
    const auto q = box.sample(s);
    REQUIRE(box.contains(p, 1e-9));
    REQUIRE((p - q).norm() <= box.diameter() * (1.0 + 1e-12));
  }
}
