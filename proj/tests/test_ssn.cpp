#include <doctest.h>

#include <cmath>
#include <sstream>

#include "delayopt/experiments.hpp"
#include "delayopt/ssn.hpp"

using namespace delayopt;

TEST_CASE("residual branches") {
  const std::vector<double> u{0.0, 2.0, 2.0, -3.0};
  const std::vector<double> lambda{0.3, 1.0, 0.0, -1.0};
  const auto phi = ssn_residual(u, lambda, 1.0);
  CHECK(phi[0] == 0.0);
  CHECK(phi[1] == 0.0);
  CHECK(phi[2] == 1.0);
  CHECK(phi[3] == 0.0);
}

TEST_CASE("active sets use strict inequalities") {
  const double C = 2.0;
  const std::vector<double> u{0.0, 5.0, -5.0, 1.0, -1.0};
  // index 3 sits on u + C (lambda - 1) = 0, index 4 on u + C (lambda + 1) = 0
  const std::vector<double> lambda{0.5, 1.0, -1.0, 0.5, -0.5};
  const auto sets = active_sets(u, lambda, C);
  CHECK(sets.plus == std::vector<std::size_t>{1});
  CHECK(sets.minus == std::vector<std::size_t>{2});
  CHECK(sets.inactive == std::vector<std::size_t>{0, 3, 4});

  const std::vector<double> z(4, 0.0), l{0.9, -0.9, 0.0, 0.5};
  CHECK(active_sets(z, l, 1e6).inactive.size() == 4);
}

TEST_CASE("gmres solves a small nonsymmetric system") {
  const std::vector<std::vector<double>> a{{4, 1, 0, 0}, {-1, 4, 1, 0}, {0, -1, 4, 1}, {0, 0, -1, 4}};
  const LinearOperator op = [&](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < 4; ++i) {
      out[i] = 0.0;
      for (std::size_t j = 0; j < 4; ++j) out[i] += a[i][j] * x[j];
    }
  };
  const std::vector<double> b{1.0, 2.0, 3.0, 4.0};
  const auto r = gmres(op, b, 1e-12, 50, 2);
  CHECK(r.converged);
  std::vector<double> ax(4);
  op(r.x, ax);
  for (std::size_t i = 0; i < 4; ++i) CHECK(ax[i] == doctest::Approx(b[i]).epsilon(1e-10));

  const std::vector<double> zero(4, 0.0);
  const auto z = gmres(op, zero, 1e-12, 50, 4);
  for (double v : z.x) CHECK(v == 0.0);
}

TEST_CASE("settings validation") {
  SsnSettings s;
  CHECK_NOTHROW(s.validate());
  s.growth = 1.0;
  CHECK_THROWS(s.validate());
  s = {};
  s.floor_tol = 1e-12;
  CHECK_THROWS(s.validate());
  s = {};
  s.c0 = 0.0;
  CHECK_THROWS(s.validate());
}

TEST_CASE("large sparsity weight gives the zero control") {
  auto cfg = preset_config("example2");
  cfg.nu = 0.1;
  cfg.space_nodes = 33;
  cfg.time_steps = 32;
  cfg.control_intervals = 16;
  const auto built = build_problem(cfg);
  const auto& p = built.problem;
  const auto zero = AtomicMeasure(p.control());
  const auto ev = evaluate(p, zero);
  std::vector<double> d(p.control().size(), 0.0);
  for (double v : jacobian_apply(p, zero, ev.y, ev.phi, 10.0, d)) CHECK(v == 0.0);

  const auto out = ssn_solve(p, 10.0, zero);
  CHECK(out.converged);
  CHECK(total_variation(out.u) == 0.0);
  for (const auto& row : out.trace) {
    CHECK(row.active_plus == 0);
    CHECK(row.active_minus == 0);
  }

  const auto res = continuation_solve(p);
  CHECK(res.converged);
  CHECK(total_variation(res.u) == 0.0);
  CHECK(res.unregularized.lambda_max_abs < 1.0);
  CHECK(res.trace.size() <= 3);

  std::ostringstream csv;
  write_trace_csv(csv, res.trace);
  CHECK(csv.str().rfind("c,newton_iter,residual_inf,norm_u,active_plus,active_minus", 0) == 0);
}

TEST_CASE("small sparsity weight gives a sparse optimal control") {
  auto cfg = preset_config("example2");
  cfg.space_nodes = 33;
  cfg.time_steps = 32;
  cfg.control_intervals = 16;
  const auto built = build_problem(cfg);
  const auto res = continuation_solve(built.problem);
  CHECK(res.converged);
  CHECK(res.unregularized.support.size() >= 1);
  CHECK(res.unregularized.support.size() <= 2);
  CHECK(res.unregularized.lambda_max_abs <= 1.0 + 1e-6);
  CHECK(res.unregularized.sign_violation_max <= 1e-6);
  CHECK(res.unregularized.J < check_optimality(built.problem, AtomicMeasure(built.problem.control())).J);
}

TEST_CASE("total Newton budget stops the continuation unconverged") {
  auto cfg = preset_config("example2");
  cfg.space_nodes = 17;
  cfg.time_steps = 32;
  cfg.control_intervals = 16;
  cfg.solver.max_total_newton = 3;
  const auto built = build_problem(cfg);
  const auto res = continuation_solve(built.problem, cfg.solver);
  CHECK_FALSE(res.converged);
  CHECK(res.trace.size() <= 4);

  cfg.solver.max_total_newton = -1;
  CHECK_THROWS(cfg.solver.validate());
}
