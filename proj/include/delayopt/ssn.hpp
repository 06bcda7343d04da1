#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "delayopt/optimality.hpp"

namespace delayopt {

struct SsnSettings {
  double c0 = 1.0;
  double growth = 10.0;
  double c_max = 1e12;
  double stop_tol = 1e-6;
  double tol = 1e-10;  ///< on ||Phi||_inf / max(1, C) relative to 1 + ||u||_inf
  double floor_tol = 1e-7;  ///< same measure, accepted once Newton stagnates
  int max_newton = 50;
  int max_total_newton = 0;  ///< over the whole continuation, 0 is unlimited
  double krylov_tol = 1e-8;
  int krylov_max = 400;
  int krylov_restart = 50;
  int max_halvings = 10;

  void validate() const;
};

/// Phi_k = u_k - max{0, u_k + C(lambda_k - 1)} - min{0, u_k + C(lambda_k + 1)}
std::vector<double> ssn_residual(std::span<const double> u, std::span<const double> lambda, double C);

struct ActiveSets {
  std::vector<std::size_t> plus;
  std::vector<std::size_t> minus;
  std::vector<std::size_t> inactive;
};

/// Strict inequalities; ties are inactive.
ActiveSets active_sets(std::span<const double> u, std::span<const double> lambda, double C);

/// d lambda = (d lambda / d u) d, including the -d/(c nu) Tikhonov part.
std::vector<double> jacobian_apply(const Problem& p, const AtomicMeasure& u, const StateTrajectory& y,
                                   const AdjointTrajectory& phi, double c, std::span<const double> d);

struct GmresResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

/// Restarted GMRES(m) from x = 0 with Givens rotations.
GmresResult gmres(const LinearOperator& a, std::span<const double> b, double tol, int max_iter,
                  int restart);

struct TraceRow {
  double c;
  int newton_iter;
  double residual_inf;
  double norm_u;
  std::size_t active_plus;
  std::size_t active_minus;
};

struct SsnOutcome {
  AtomicMeasure u;
  std::vector<TraceRow> trace;
  bool converged = false;
  bool krylov_fallback = false;
};

SsnOutcome ssn_solve(const Problem& p, double c, const AtomicMeasure& u_init,
                     const SsnSettings& settings = {});

struct SsnResult {
  AtomicMeasure u;
  std::vector<TraceRow> trace;
  OptimalityReport report;         ///< lambda and J at the final c
  OptimalityReport unregularized;  ///< c = infinity
  double final_c = 0.0;
  bool converged = false;
  bool krylov_fallback = false;
};

SsnResult continuation_solve(const Problem& p, const SsnSettings& settings = {},
                             const std::optional<AtomicMeasure>& u_init = std::nullopt);

/// `c,newton_iter,residual_inf,norm_u,active_plus,active_minus`
void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace);

}  // namespace delayopt
