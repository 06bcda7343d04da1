#include "delayopt/optimality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace delayopt {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

/// out_k += sum_i ds_i <adj_{i-1}, state(s_i - t_k)>_M
void accumulate_pairing(const Problem& p, const Trajectory& adj, const Trajectory& state,
                        bool with_history, std::vector<double>& out) {
  const std::size_t n = p.mesh().size();
  const std::size_t K = p.control().size();
  std::vector<double> madj(n);
  for (std::size_t i = 1; i <= p.steps(); ++i) {
    const auto a = adj.row(i - 1);
    if (std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; })) continue;
    p.ops().mass.multiply(a, madj);
    const double dt = p.time().step(i);
    for (std::size_t k = 0; k < K; ++k) {
      const auto& e = p.entry(i, k);
      double v;
      if (e.history >= 0) {
        if (!with_history) continue;
        v = dot(madj, p.history_sample(e.history));
      } else {
        v = (1.0 - e.theta) * dot(madj, state.row(e.row));
        if (e.theta > 0.0) v += e.theta * dot(madj, state.row(e.row + 1));
      }
      out[k] += dt * v;
    }
  }
}

}  // namespace

double tracking_cost(const Problem& p, const StateTrajectory& y) {
  const auto w = p.tracking_weights();
  const std::size_t n = p.mesh().size();
  std::vector<double> e(n);
  double sum = 0.0;
  for (std::size_t i = p.window_first(); i <= p.window_last(); ++i) {
    const auto yi = y.values.row(i);
    const auto di = p.target().row(i);
    for (std::size_t j = 0; j < n; ++j) e[j] = yi[j] - di[j];
    sum += w[i] * l2_inner(p.ops(), e, e);
  }
  return 0.5 * sum;
}

std::vector<double> delay_gradient(const Problem& p, const StateTrajectory& y,
                                   const AdjointTrajectory& phi) {
  std::vector<double> g(p.control().size(), 0.0);
  accumulate_pairing(p, phi.values, y.values, true, g);
  return g;
}

std::vector<double> delay_gradient_derivative(const Problem& p, const StateTrajectory& y,
                                              const AdjointTrajectory& phi, const StateTrajectory& z,
                                              const AdjointTrajectory& eta) {
  std::vector<double> h(p.control().size(), 0.0);
  accumulate_pairing(p, eta.values, y.values, true, h);
  accumulate_pairing(p, phi.values, z.values, false, h);
  return h;
}

std::vector<double> compute_lambda(const Problem& p, const AtomicMeasure& u, const StateTrajectory& y,
                                   const AdjointTrajectory& phi, double c) {
  auto lambda = delay_gradient(p, y, phi);
  const double nu = p.nu();
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    lambda[k] = -lambda[k] / nu;
    if (std::isfinite(c)) lambda[k] -= u.weight(k) / (c * nu);
  }
  return lambda;
}

double lambda_at(const Problem& p, const StateTrajectory& y, const AdjointTrajectory& phi, double s) {
  if (s < 0.0 || s > p.time().final_time())
    throw std::invalid_argument("lambda_at: delay outside [0, T]");
  const std::size_t n = p.mesh().size();
  std::vector<double> madj(n);
  double sum = 0.0;
  for (std::size_t i = 1; i <= p.steps(); ++i) {
    p.ops().mass.multiply(phi.values.row(i - 1), madj);
    sum += p.time().step(i) * dot(madj, sample_delayed(y, p.time()[i] - s));
  }
  return -sum / p.nu();
}

double grad_F_direction(const Problem& p, const StateTrajectory& y, const AdjointTrajectory& phi,
                        const AtomicMeasure& v) {
  const auto st = p.stencils(v);
  const std::size_t n = p.mesh().size();
  std::vector<double> q(n), madj(n);
  double sum = 0.0;
  for (std::size_t i = 1; i <= p.steps(); ++i) {
    std::fill(q.begin(), q.end(), 0.0);
    st[i].apply(y.values, q, 1.0, true);
    p.ops().mass.multiply(phi.values.row(i - 1), madj);
    sum += p.time().step(i) * dot(madj, q);
  }
  return sum;
}

OptimalityReport optimality_report(const Problem& p, const AtomicMeasure& u, std::vector<double> lambda,
                                   double F, double c, double tol_supp, double tol) {
  OptimalityReport r;
  r.norm_u = total_variation(u);
  if (tol_supp < 0.0) tol_supp = 1e-10 * std::max(1.0, r.norm_u);
  r.F = F;
  r.nu_j = p.nu() * r.norm_u;
  r.c = c;
  if (std::isfinite(c)) {
    double sq = 0.0;
    for (double w : u.weights()) sq += w * w;
    r.tikhonov = sq / (2.0 * c);
  }
  r.J = r.F + r.nu_j + r.tikhonov;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double l = lambda[k];
    r.lambda_max_abs = std::max(r.lambda_max_abs, std::abs(l));
    bool bad = std::abs(l) > 1.0 + tol;
    const double w = u.weight(k);
    if (std::abs(w) > tol_supp) {
      r.support.push_back(k);
      const double viol = w > 0.0 ? std::abs(l - 1.0) : std::abs(l + 1.0);
      r.sign_violation_max = std::max(r.sign_violation_max, viol);
      bad = bad || viol > tol;
    }
    if (bad) ++r.violation_count;
  }
  r.lambda = std::move(lambda);
  return r;
}

Evaluation evaluate(const Problem& p, const AtomicMeasure& u) {
  auto y = solve_state(p, u);
  auto phi = solve_adjoint(p, u, y);
  const double F = tracking_cost(p, y);
  auto g = delay_gradient(p, y, phi);
  return Evaluation{std::move(y), std::move(phi), F, std::move(g)};
}

OptimalityReport check_optimality(const Problem& p, const AtomicMeasure& u, double c) {
  const auto ev = evaluate(p, u);
  return optimality_report(p, u, compute_lambda(p, u, ev.y, ev.phi, c), ev.F, c);
}

void write_report_json(std::ostream& out, const OptimalityReport& r) {
  nlohmann::json j;
  j["F"] = r.F;
  j["nu_j"] = r.nu_j;
  j["tikhonov"] = r.tikhonov;
  j["J"] = r.J;
  j["norm_u"] = r.norm_u;
  j["support"] = r.support;
  j["lambda_max_abs"] = r.lambda_max_abs;
  j["sign_violation_max"] = r.sign_violation_max;
  j["violation_count"] = r.violation_count;
  if (std::isfinite(r.c)) j["c"] = r.c;
  else j["c"] = nullptr;
  out << j.dump(2) << '\n';
}

void write_lambda_csv(std::ostream& out, const AtomicMeasure& u, std::span<const double> lambda) {
  const auto old = out.precision(17);
  out << "t,u,lambda\n";
  for (std::size_t k = 0; k < u.size(); ++k)
    out << u.location(k) << ',' << u.weight(k) << ',' << lambda[k] << '\n';
  out.precision(old);
}

}  // namespace delayopt
