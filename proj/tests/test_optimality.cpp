#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "delayopt/optimality.hpp"
#include "problems.hpp"

using namespace delayopt;
using testing_support::small_spec;

namespace {

Problem cubic_problem(std::size_t nodes = 17, std::size_t steps = 32) {
  auto spec = small_spec(nodes, steps, ReactionModel::cubic(1.0 / 3.0, -std::sqrt(3.0), 0.0, std::sqrt(3.0)),
                         Prehistory::affine_sin2(0.2, 0.2, 0.0, 1.0), 1.0, 8, 1e-3);
  for (std::size_t i = 0; i <= steps; ++i)
    for (std::size_t j = 0; j < nodes; ++j) spec.target(i, j) = 0.1 * std::cos(std::numbers::pi * spec.mesh.nodes()[j]);
  return Problem(spec);
}

}  // namespace

TEST_CASE("tracking cost of simple mismatches") {
  auto spec = small_spec(9, 16, ReactionModel::zero(), Prehistory::constant(1.0), 2.0);
  const Problem matched(spec);
  const AtomicMeasure zero(matched.control());
  const auto y = solve_state(matched, zero);
  CHECK(tracking_cost(matched.with_target(y.values), y) == 0.0);
  CHECK(tracking_cost(matched, y) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("tracking cost is a trapezoid of exact spatial integrals") {
  const std::size_t n = 65, steps = 64;
  auto spec = small_spec(n, steps, ReactionModel::zero(), Prehistory::constant(0.0));
  const Problem p(spec);
  const auto y = solve_state(p, AtomicMeasure(p.control()));
  const double pi = std::numbers::pi;
  auto e = [&](double x, double t) { return std::cos(pi * x) * (1.0 + t * t); };
  Trajectory mis(steps + 1, n);
  for (std::size_t i = 0; i <= steps; ++i)
    for (std::size_t j = 0; j < n; ++j) mis(i, j) = -e(p.mesh().nodes()[j], p.time()[i]);
  const double J = tracking_cost(p.with_target(mis), y);

  const double g = 0.5 / std::sqrt(3.0);
  const double h = 1.0 / (n - 1), dt = 1.0 / steps;
  double oracle = 0.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    double space = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const double a = e(j * h, i * dt), b = e((j + 1) * h, i * dt);
      for (double q : {0.5 - g, 0.5 + g}) space += 0.5 * h * std::pow((1 - q) * a + q * b, 2);
    }
    oracle += ((i == 0 || i == steps) ? 0.5 : 1.0) * dt * 0.5 * space;
  }
  CHECK(std::abs(J - oracle) <= 1e-12 * oracle);
  // continuous value: 1/4 * int_0^1 (1 + t^2)^2 dt = 1/4 * 28/15
  CHECK(std::abs(J - 7.0 / 15.0) <= 1e-3 * J);
}

TEST_CASE("lambda vanishes with the adjoint") {
  const Problem p = cubic_problem();
  const AtomicMeasure u(p.control(), {0.0, 0.5, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0});
  const auto y = solve_state(p, u);
  AdjointTrajectory phi{p.time_ptr(), Trajectory(p.steps() + 1, p.mesh().size())};
  const auto lambda = compute_lambda(p, u, y, phi);
  for (double v : lambda) CHECK(v == 0.0);
  const double c = 100.0;
  const auto reg = compute_lambda(p, u, y, phi, c);
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(reg[k] == doctest::Approx(-u.weight(k) / (c * p.nu())));
}

TEST_CASE("directional gradient is consistent with lambda") {
  const Problem p = cubic_problem();
  const AtomicMeasure u(p.control(), {0.0, 0.5, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.3});
  const auto ev = evaluate(p, u);
  const auto lambda = compute_lambda(p, u, ev.y, ev.phi);
  CHECK(grad_F_direction(p, ev.y, ev.phi, AtomicMeasure(p.control())) == 0.0);
  for (std::size_t k = 0; k < u.size(); ++k) {
    std::vector<double> w(u.size(), 0.0);
    w[k] = 1.0;
    const double g = grad_F_direction(p, ev.y, ev.phi, AtomicMeasure(p.control(), w));
    CHECK(g == doctest::Approx(-p.nu() * lambda[k]).epsilon(1e-12));
    CHECK(lambda_at(p, ev.y, ev.phi, p.control()[k]) == doctest::Approx(lambda[k]).epsilon(1e-12));
  }
}

TEST_CASE("directional gradient matches central differences") {
  const Problem p = cubic_problem(33, 64);
  std::mt19937 rng(4);
  std::normal_distribution<double> normal;
  std::vector<double> w(p.control().size());
  for (double& v : w) v = 0.3 * normal(rng);
  const AtomicMeasure u(p.control(), w);
  const auto ev = evaluate(p, u);
  for (int d = 0; d < 3; ++d) {
    std::vector<double> dv(w.size()), up(w.size()), um(w.size());
    for (double& v : dv) v = normal(rng);
    const double rho = 1e-5;
    for (std::size_t k = 0; k < w.size(); ++k) {
      up[k] = w[k] + rho * dv[k];
      um[k] = w[k] - rho * dv[k];
    }
    const double fd = (tracking_cost(p, solve_state(p, AtomicMeasure(p.control(), up))) -
                       tracking_cost(p, solve_state(p, AtomicMeasure(p.control(), um)))) /
                      (2.0 * rho);
    const double g = grad_F_direction(p, ev.y, ev.phi, AtomicMeasure(p.control(), dv));
    CHECK(std::abs(g - fd) <= 1e-5 * std::abs(fd));
  }
}

TEST_CASE("optimality report conditions") {
  const Problem p = cubic_problem();
  const std::size_t K = p.control().size();
  std::vector<double> lambda(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) lambda[k] = std::sin(1.0 + k);
  const auto zero = optimality_report(p, AtomicMeasure(p.control()), lambda, 0.1);
  CHECK(zero.support.empty());
  CHECK(zero.violation_count == 0);
  CHECK(zero.sign_violation_max == 0.0);

  std::vector<double> w(K, 0.0);
  w[3] = 0.7;
  lambda[3] = 1.0;
  const auto one = optimality_report(p, AtomicMeasure(p.control(), w), lambda, 0.1);
  REQUIRE(one.support.size() == 1);
  CHECK(one.support[0] == 3);
  CHECK(one.violation_count == 0);
  CHECK(one.norm_u == doctest::Approx(0.7));
  CHECK(one.J == doctest::Approx(0.1 + p.nu() * 0.7));

  lambda[3] = -1.0;
  const auto bad = optimality_report(p, AtomicMeasure(p.control(), w), lambda, 0.1);
  CHECK(bad.violation_count >= 1);
  CHECK(bad.sign_violation_max == doctest::Approx(2.0));
}
