#include <doctest.h>

#include <cmath>
#include <memory>

#include "delayopt/delay_ops.hpp"
#include "delayopt/experiments.hpp"

using namespace delayopt;

namespace {

StateTrajectory linear_trajectory(std::shared_ptr<const Prehistory> history) {
  auto time = std::make_shared<const TimeGrid>(TimeGrid::uniform(1.0, 8));
  auto mesh = std::make_shared<const SpaceMesh>(SpaceMesh::uniform(0.0, 1.0, 5));
  StateTrajectory y{time, mesh, std::move(history), Trajectory(9, 5)};
  for (std::size_t i = 0; i <= 8; ++i)
    for (std::size_t j = 0; j < 5; ++j) y.values(i, j) = (1.0 + (*time)[i]) * (1.0 + mesh->nodes()[j]);
  return y;
}

}  // namespace

TEST_CASE("delayed sampling") {
  const auto y = linear_trajectory(std::make_shared<const Prehistory>(Prehistory::constant(1.0)));
  const auto row = sample_delayed(y, 0.375);
  for (std::size_t j = 0; j < 5; ++j) CHECK(row[j] == y.values(3, j));

  const auto mid = sample_delayed(y, 0.4375);
  for (std::size_t j = 0; j < 5; ++j) CHECK(mid[j] == doctest::Approx(0.5 * (y.values(3, j) + y.values(4, j))));

  const auto past = sample_delayed(y, -0.5);
  for (double v : past) CHECK(v == 1.0);
}

TEST_CASE("instantaneous atom is implicit") {
  const auto y = linear_trajectory(nullptr);
  const auto src = delay_source(GeneralMeasure(1.0, {{0.0, 1.0}}), y, 0.5);
  CHECK(src.implicit_coeff == 1.0);
  for (double v : src.explicit_part) CHECK(v == 0.0);

  const AtomicMeasure d0(ControlGrid::uniform(1.0, 4), {1.0, 0.0, 0.0, 0.0, 0.0});
  const auto a = delay_source(d0, y, 0.5);
  CHECK(a.implicit_coeff == 1.0);
}

TEST_CASE("single delayed atom reproduces the shifted state") {
  const auto y = linear_trajectory(nullptr);
  const double tau = 0.25;
  const auto src = delay_source(GeneralMeasure(1.0, {{tau, 1.0}}), y, 0.75);
  CHECK(src.implicit_coeff == 0.0);
  const auto ref = sample_delayed(y, 0.5);
  for (std::size_t j = 0; j < 5; ++j) CHECK(src.explicit_part[j] == doctest::Approx(ref[j]));

  const AtomicMeasure a(ControlGrid::uniform(1.0, 4), {0.0, 2.0, 0.0, 0.0, 0.0});
  const auto s = delay_source(a, y, 0.75);
  for (std::size_t j = 0; j < 5; ++j) CHECK(s.explicit_part[j] == doctest::Approx(2.0 * ref[j]));
}

TEST_CASE("nonlocal kernel preserves constant equilibria") {
  const double c = 0.7;
  auto time = std::make_shared<const TimeGrid>(TimeGrid::uniform(2.0, 16));
  auto mesh = std::make_shared<const SpaceMesh>(SpaceMesh::uniform(0.0, 1.0, 5));
  StateTrajectory y{time, mesh, std::make_shared<const Prehistory>(Prehistory::constant(c)), Trajectory(17, 5, c)};
  const auto k = pyragas_kernel(0.5, 0.456, 0.541);
  for (double t : {0.3, 1.0, 2.0}) {
    const auto src = delay_source(k, y, t);
    CHECK(src.implicit_coeff == doctest::Approx(-0.5));
    for (double v : src.explicit_part) {
      CHECK(v == doctest::Approx(0.5 * c).epsilon(1e-12));
      CHECK(src.implicit_coeff * c + v == doctest::Approx(0.0).scale(1.0));
    }
  }
}

TEST_CASE("density stencil matches a dense quadrature") {
  auto time = std::make_shared<const TimeGrid>(TimeGrid::uniform(1.0, 40));
  auto mesh = std::make_shared<const SpaceMesh>(SpaceMesh::uniform(-1.0, 1.0, 5));
  auto history = std::make_shared<const Prehistory>(Prehistory::traveling_front(0.0, 0.25, 1.0));
  StateTrajectory y{time, mesh, history, Trajectory(41, 5)};
  for (std::size_t i = 0; i <= 40; ++i)
    for (std::size_t j = 0; j < 5; ++j) y.values(i, j) = std::sin(3.0 * (*time)[i] + mesh->nodes()[j]);
  const GeneralMeasure u(1.0, {{0.0, -0.5}}, {{0.456, 0.541, 0.5 / (0.541 - 0.456)}});
  const double t = 0.75;
  const auto src = delay_source(u, y, t);
  // midpoint rule on the piecewise-linear-in-time trajectory
  const int n = 200000;
  const double a = 0.456, b = 0.541, h = (b - a) / n;
  std::vector<double> ref(5, 0.0);
  for (int q = 0; q < n; ++q) {
    const auto v = sample_delayed(y, t - (a + (q + 0.5) * h));
    for (std::size_t j = 0; j < 5; ++j) ref[j] += h * 0.5 / (b - a) * v[j];
  }
  for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(src.explicit_part[j] - ref[j]) <= 1e-8);
}

TEST_CASE("adjoint delay source") {
  auto time = std::make_shared<const TimeGrid>(TimeGrid::uniform(1.0, 8));
  AdjointTrajectory phi{time, Trajectory(9, 3)};
  for (std::size_t i = 0; i <= 8; ++i)
    for (std::size_t j = 0; j < 3; ++j) phi.values(i, j) = 1.0 + (*time)[i] + j;
  const auto grid = ControlGrid::uniform(1.0, 4);

  const auto d0 = adjoint_delay_source(AtomicMeasure(grid, {1.0, 0.0, 0.0, 0.0, 0.0}), phi, 0.5);
  CHECK(d0.implicit_coeff == 1.0);
  for (double v : d0.explicit_part) CHECK(v == 0.0);

  const AtomicMeasure dt(grid, {0.0, 3.0, 0.0, 0.0, 0.0});
  const auto early = adjoint_delay_source(dt, phi, 0.5);
  const auto ref = phi.sample(0.75);
  for (std::size_t j = 0; j < 3; ++j) CHECK(early.explicit_part[j] == doctest::Approx(3.0 * ref[j]));

  const auto late = adjoint_delay_source(dt, phi, 0.75);
  for (double v : late.explicit_part) CHECK(v == 0.0);
  const auto later = adjoint_delay_source(dt, phi, 0.875);
  for (double v : later.explicit_part) CHECK(v == 0.0);
}
