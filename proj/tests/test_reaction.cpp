#include <doctest.h>

#include <cmath>
#include <random>

#include "delayopt/reaction.hpp"

using namespace delayopt;

TEST_CASE("cubic reaction roots and derivatives") {
  const auto r = ReactionModel::cubic(1.0 / 3.0, -std::sqrt(3.0), 0.0, std::sqrt(3.0));
  CHECK(reaction_eval(r, 0.0, 0) == 0.0);
  CHECK(reaction_eval(r, std::sqrt(3.0), 0) == doctest::Approx(0.0));

  const auto s = ReactionModel::cubic(1.0, 0.0, 0.25, 1.0);
  CHECK(reaction_eval(s, 1.0, 0) == doctest::Approx(0.0));
  CHECK(reaction_eval(s, 1.0, 1) == doctest::Approx(0.75));
  CHECK(reaction_eval(s, 0.0, 2) == doctest::Approx(-2.5));
}

TEST_CASE("derivative matches central differences") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    double y1 = unit(rng), y2 = unit(rng), y3 = unit(rng);
    if (y1 > y2) std::swap(y1, y2);
    if (y2 > y3) std::swap(y2, y3);
    if (y1 > y2) std::swap(y1, y2);
    const auto r = ReactionModel::cubic(0.5 + std::abs(unit(rng)), y1, y2, y3);
    const double y = unit(rng), h = 1e-6;
    const double fd = (r.eval(y + h) - r.eval(y - h)) / (2.0 * h);
    CHECK(std::abs(fd - r.eval(y, 1)) <= 1e-6 * std::max(1.0, std::abs(r.eval(y, 1))));
  }
}

TEST_CASE("derivative lower bound") {
  CHECK(ReactionModel({0.0, 1.0}).derivative_lower_bound() == 1.0);
  CHECK(ReactionModel::zero().derivative_lower_bound() == 0.0);
  const auto s = ReactionModel::cubic(1.0, 0.0, 0.25, 1.0);
  // R'(y) = 3y^2 - 2.5y + 0.25 has its minimum at y = 5/12
  CHECK(s.derivative_lower_bound() == doctest::Approx(0.25 - 2.5 * 2.5 / 12.0));
}

TEST_CASE("invalid reaction models are rejected") {
  CHECK_THROWS(ReactionModel({0.0, 0.0, 1.0}));
  CHECK_THROWS(ReactionModel({0.0, 0.0, 0.0, -1.0}));
  CHECK_THROWS(ReactionModel::cubic(1.0, 1.0, 0.0, 2.0));
  CHECK_THROWS(ReactionModel::cubic(-1.0, 0.0, 0.5, 1.0));
}
