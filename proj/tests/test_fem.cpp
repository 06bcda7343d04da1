#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "delayopt/fem.hpp"

using namespace delayopt;

namespace {

double gauss_inner(const SpaceMesh& mesh, const std::vector<double>& a, const std::vector<double>& b) {
  const double g = 0.5 / std::sqrt(3.0);
  double sum = 0.0;
  for (std::size_t e = 0; e + 1 < mesh.size(); ++e) {
    const double h = mesh.nodes()[e + 1] - mesh.nodes()[e];
    for (double q : {0.5 - g, 0.5 + g}) {
      const double va = (1 - q) * a[e] + q * a[e + 1];
      const double vb = (1 - q) * b[e] + q * b[e + 1];
      sum += 0.5 * h * va * vb;
    }
  }
  return sum;
}

SpaceMesh random_mesh(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<double> step(0.1, 1.0);
  std::vector<double> x{-0.3};
  for (std::size_t i = 1; i < n; ++i) x.push_back(x.back() + step(rng));
  return SpaceMesh(x);
}

}  // namespace

TEST_CASE("matrices on two elements") {
  const auto ops = assemble(SpaceMesh::uniform(0.0, 1.0, 3));
  const double h = 0.5;
  CHECK(ops.stiffness.diag[0] == doctest::Approx(1.0 / h));
  CHECK(ops.stiffness.diag[1] == doctest::Approx(2.0 / h));
  CHECK(ops.stiffness.diag[2] == doctest::Approx(1.0 / h));
  CHECK(ops.stiffness.upper[0] == doctest::Approx(-1.0 / h));
  CHECK(ops.stiffness.lower[1] == doctest::Approx(-1.0 / h));
  CHECK(ops.stiffness.upper[1] == doctest::Approx(-1.0 / h));
  CHECK(ops.stiffness.lower[2] == doctest::Approx(-1.0 / h));
  CHECK(ops.mass.diag[0] == doctest::Approx(2.0 * h / 6.0));
  CHECK(ops.mass.diag[1] == doctest::Approx(4.0 * h / 6.0));
  CHECK(ops.mass.diag[2] == doctest::Approx(2.0 * h / 6.0));
  CHECK(ops.mass.upper[0] == doctest::Approx(h / 6.0));
  CHECK(ops.mass.lower[2] == doctest::Approx(h / 6.0));
}

TEST_CASE("mass integrates constants on a nonuniform mesh") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto mesh = random_mesh(rng, 20 + trial);
    const auto ops = assemble(mesh);
    const std::vector<double> one(mesh.size(), 1.0);
    CHECK(std::abs(l2_inner(ops, one, one) - mesh.length()) <= 1e-14 * mesh.length());
  }
}

TEST_CASE("inner products") {
  const auto mesh = SpaceMesh::uniform(0.0, 1.0, 9);
  const auto ops = assemble(mesh);
  const std::vector<double> one(9, 1.0);
  std::vector<double> x(mesh.nodes().begin(), mesh.nodes().end());
  CHECK(l2_inner(ops, one, one) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(l2_inner(ops, one, x) == doctest::Approx(0.5).epsilon(1e-15));

  std::mt19937 rng(9);
  std::normal_distribution<double> normal;
  const auto rm = random_mesh(rng, 17);
  const auto rops = assemble(rm);
  std::vector<double> a(17), b(17);
  for (std::size_t i = 0; i < 17; ++i) {
    a[i] = normal(rng);
    b[i] = normal(rng);
  }
  const double ref = gauss_inner(rm, a, b);
  CHECK(std::abs(l2_inner(rops, a, b) - ref) <= 1e-12 * std::abs(ref));
}

TEST_CASE("stiffness energy converges at second order") {
  // f = cos(pi x): int |f'|^2 = pi^2 / 2 on (0, 1)
  const double exact = std::numbers::pi * std::numbers::pi / 2.0;
  std::vector<double> err;
  for (std::size_t n : {9, 17, 33, 65}) {
    const auto mesh = SpaceMesh::uniform(0.0, 1.0, n);
    const auto ops = assemble(mesh);
    std::vector<double> f(n), af(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = std::cos(std::numbers::pi * mesh.nodes()[i]);
    ops.stiffness.multiply(f, af);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e += f[i] * af[i];
    err.push_back(std::abs(e - exact));
  }
  for (std::size_t i = 1; i < err.size(); ++i) CHECK(std::log2(err[i - 1] / err[i]) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("thomas solver") {
  Tridiagonal a(4);
  a.diag = {4.0, 4.0, 4.0, 4.0};
  a.lower = {0.0, 1.0, 1.0, 1.0};
  a.upper = {1.0, 1.0, 1.0, 0.0};
  const std::vector<double> x{1.0, -2.0, 3.0, 0.5};
  std::vector<double> b(4), y(4);
  a.multiply(x, b);
  solve_tridiagonal(a, b, y);
  for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(x[i]));

  const auto t = a.transposed();
  std::vector<double> tb(4);
  t.multiply(x, tb);
  CHECK(tb[0] == doctest::Approx(4.0 * 1.0 + 1.0 * -2.0));

  Tridiagonal z(2);
  std::vector<double> zb{1.0, 1.0}, zx(2);
  CHECK_THROWS_AS(solve_tridiagonal(z, zb, zx), std::runtime_error);
}

TEST_CASE("time grids") {
  const auto u = TimeGrid::uniform(2.0, 8);
  CHECK(u.steps() == 8);
  CHECK(u[8] == 2.0);
  const auto loc = u.locate(0.25 * 3 + 0.125);
  CHECK(loc.row == 3);
  CHECK(loc.theta == doctest::Approx(0.5));
  CHECK(u.locate(0.5 * (1.0 + 1e-12)).theta == 0.0);
  CHECK(u.nearest(0.26) == 1);

  const auto g = TimeGrid::graded(40.0, 100, 10.0);
  CHECK(g[100] == doctest::Approx(40.0));
  CHECK(g.step(100) / g.step(1) == doctest::Approx(10.0));
  CHECK_THROWS(TimeGrid({0.0, 1.0, 0.5}));
}
