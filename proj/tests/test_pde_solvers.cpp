#include <doctest.h>

#include <cmath>
#include <numbers>

#include "delayopt/experiments.hpp"
#include "delayopt/pde_solvers.hpp"
#include "problems.hpp"

using namespace delayopt;
using testing_support::small_spec;

TEST_CASE("heat equation keeps constants") {
  const Problem p(small_spec(9, 16, ReactionModel::zero(), Prehistory::constant(0.3)));
  const auto y = solve_state(p, AtomicMeasure(p.control()));
  for (double v : y.values.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("stable equilibrium is a fixed point") {
  const Problem p(small_spec(9, 16, ReactionModel::cubic(1.0, 0.0, 0.25, 1.0), Prehistory::constant(1.0)));
  const auto y = solve_state(p, AtomicMeasure(p.control()));
  for (double v : y.values.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("first step with the nonlocal kernel matches a quadrature of the prehistory") {
  auto spec = small_spec(41, 1200, ReactionModel::cubic(1.0, 0.0, 0.25, 1.0),
                         Prehistory::traveling_front(0.0, 0.25, 1.0), 0.6, 4);
  spec.mesh = SpaceMesh::uniform(-10.0, 10.0, 41);
  const Problem p(spec);
  const auto kernel = pyragas_kernel(0.5, 0.456, 0.541);
  const auto y = solve_state(p, kernel);

  const auto& ops = p.ops();
  const auto x = p.mesh().nodes();
  const double dt = p.time().step(1), t1 = p.time()[1];
  const std::size_t n = x.size();
  std::vector<double> ref(n, 0.0);
  const int m = 20000;
  const double a = 0.456, b = 0.541, h = (b - a) / m;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (int q = 0; q <= m; ++q) {
      const double w = (q == 0 || q == m) ? 1.0 : (q % 2 ? 4.0 : 2.0);
      s += w * spec.prehistory(x[j], t1 - (a + q * h));
    }
    ref[j] = 0.5 / (b - a) * s * h / 3.0;
  }
  std::vector<double> y0(n), y1(n), lhs(n, 0.0), tmp(n);
  for (std::size_t j = 0; j < n; ++j) {
    y0[j] = y.values(0, j);
    y1[j] = y.values(1, j);
    tmp[j] = (y1[j] - y0[j]) / dt + p.reaction().eval(y1[j]) + 0.5 * y1[j] - ref[j];
  }
  ops.mass.multiply(tmp, lhs);
  ops.stiffness.multiply_add(1.0, y1, lhs);
  std::vector<double> w(n);
  solve_tridiagonal(ops.mass, lhs, w);
  double worst = 0.0;
  for (double v : w) worst = std::max(worst, std::abs(v));
  CHECK(worst <= 1e-8);
}

TEST_CASE("adjoint of a matched state vanishes") {
  auto spec = small_spec(9, 16, ReactionModel::cubic(1.0, 0.0, 0.25, 1.0), Prehistory::constant(0.5));
  const Problem plain(spec);
  const AtomicMeasure zero(plain.control());
  const auto y = solve_state(plain, zero);
  const auto p = plain.with_target(y.values);
  const auto phi = solve_adjoint(p, zero, solve_state(p, zero));
  for (double v : phi.values.data()) CHECK(v == 0.0);
}

TEST_CASE("adjoint with unit mismatch decays linearly") {
  auto spec = small_spec(9, 64, ReactionModel::zero(), Prehistory::constant(1.0));
  const Problem p(spec);
  const AtomicMeasure zero(p.control());
  const auto y = solve_state(p, zero);
  const auto phi = solve_adjoint(p, zero, y);
  const double dt = p.time().step(1);
  for (std::size_t i = 0; i <= p.steps(); ++i)
    for (std::size_t j = 0; j < p.mesh().size(); ++j)
      CHECK(std::abs(phi.values(i, j) - (1.0 - p.time()[i])) <= dt);
}

TEST_CASE("linearizations vanish in the zero direction") {
  const Problem p(small_spec(9, 16, ReactionModel::cubic(1.0, 0.0, 0.25, 1.0), Prehistory::constant(0.5)));
  const AtomicMeasure u(p.control(), {0.1, 0.0, -0.2, 0.0, 0.3, 0.0, 0.0, 0.0, 0.1});
  const auto y = solve_state(p, u);
  const auto phi = solve_adjoint(p, u, y);
  const AtomicMeasure v(p.control());
  const auto z = solve_linearized_state(p, u, y, v);
  const auto eta = solve_linearized_adjoint(p, u, y, phi, v, z);
  for (double s : z.values.data()) CHECK(s == 0.0);
  for (double s : eta.values.data()) CHECK(s == 0.0);
}

TEST_CASE("manufactured solution converges in time and space") {
  auto run = [](std::size_t nodes, std::size_t steps) {
    const double pi = std::numbers::pi;
    auto spec = small_spec(nodes, steps, ReactionModel({0.0, 1.0}),
                           Prehistory("exact", [=](double x, double t) { return std::exp(-t) * std::cos(pi * x); }));
    spec.forcing = [=](double x, double t) { return pi * pi * std::exp(-t) * std::cos(pi * x); };
    const Problem p(spec);
    const auto y = solve_state(p, AtomicMeasure(p.control()));
    double err = 0.0;
    std::vector<double> e(nodes);
    for (std::size_t i = 1; i <= steps; ++i) {
      for (std::size_t j = 0; j < nodes; ++j)
        e[j] = y.values(i, j) - std::exp(-p.time()[i]) * std::cos(pi * p.mesh().nodes()[j]);
      err += p.time().step(i) * l2_inner(p.ops(), e, e);
    }
    return std::sqrt(err);
  };
  const double t1 = run(129, 16), t2 = run(129, 32);
  CHECK(std::log2(t1 / t2) == doctest::Approx(1.0).epsilon(0.1));
  const double s1 = run(5, 2048), s2 = run(9, 2048);
  CHECK(std::log2(s1 / s2) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("invalid problems are rejected") {
  auto spec = small_spec(9, 16, ReactionModel::zero(), Prehistory::constant(0.0));
  spec.target = Trajectory(3, 9);
  CHECK_THROWS(Problem(spec));
  auto late = small_spec(9, 16, ReactionModel::zero(), Prehistory::constant(0.0));
  late.control = ControlGrid::uniform(2.0, 4);
  CHECK_THROWS(Problem(late));
}
