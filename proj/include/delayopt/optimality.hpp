#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "delayopt/pde_solvers.hpp"

namespace delayopt {

inline constexpr double kNoTikhonov = std::numeric_limits<double>::infinity();

/// 1/2 of the time-trapezoid over the tracking window of ||y - y_d||^2_M.
double tracking_cost(const Problem& p, const StateTrajectory& y);

/// g_k = F'(u) delta_{t_k} = sum_i ds_i <phi_{i-1}, y(s_i - t_k)>_M for every
/// control node. Pairs the adjoint with the delayed state exactly as the
/// transposed scheme does, so g is the derivative of the discrete F.
std::vector<double> delay_gradient(const Problem& p, const StateTrajectory& y,
                                   const AdjointTrajectory& phi);

/// Derivative of delay_gradient in direction v, given z = G'(u)v and the
/// linearized adjoint eta.
std::vector<double> delay_gradient_derivative(const Problem& p, const StateTrajectory& y,
                                              const AdjointTrajectory& phi, const StateTrajectory& z,
                                              const AdjointTrajectory& eta);

/// lambda_k = -g_k / nu - u_k / (c nu); c = kNoTikhonov drops the last term.
std::vector<double> compute_lambda(const Problem& p, const AtomicMeasure& u, const StateTrajectory& y,
                                   const AdjointTrajectory& phi, double c = kNoTikhonov);

/// Unregularized lambda at an arbitrary delay s in [0, T].
double lambda_at(const Problem& p, const StateTrajectory& y, const AdjointTrajectory& phi, double s);

/// F'(u)v for any atomic v; v need not live on the problem's control grid.
double grad_F_direction(const Problem& p, const StateTrajectory& y, const AdjointTrajectory& phi,
                        const AtomicMeasure& v);

struct OptimalityReport {
  std::vector<double> lambda;
  double lambda_max_abs = 0.0;
  std::vector<std::size_t> support;
  double F = 0.0;
  double nu_j = 0.0;
  double tikhonov = 0.0;
  double J = 0.0;
  double norm_u = 0.0;
  double sign_violation_max = 0.0;
  std::size_t violation_count = 0;
  double c = kNoTikhonov;
};

/// Support uses |u_k| > tol_supp; a negative tol_supp selects
/// 1e-10 * max(1, ||u||). Violations are counted above `tol`.
OptimalityReport optimality_report(const Problem& p, const AtomicMeasure& u, std::vector<double> lambda,
                                   double F, double c = kNoTikhonov, double tol_supp = -1.0,
                                   double tol = 1e-6);

/// State, adjoint and derived quantities at one control.
struct Evaluation {
  StateTrajectory y;
  AdjointTrajectory phi;
  double F;
  std::vector<double> g;
};

Evaluation evaluate(const Problem& p, const AtomicMeasure& u);

/// Solves state and adjoint, then reports with lambda at the given c.
OptimalityReport check_optimality(const Problem& p, const AtomicMeasure& u, double c = kNoTikhonov);

void write_report_json(std::ostream& out, const OptimalityReport& r);
/// `t,u,lambda` per control node.
void write_lambda_csv(std::ostream& out, const AtomicMeasure& u, std::span<const double> lambda);

}  // namespace delayopt
