#include "delayopt/ssn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace delayopt {

void SsnSettings::validate() const {
  if (!(c0 > 0.0)) throw std::invalid_argument("solver.c0 must be positive");
  if (!(growth > 1.0)) throw std::invalid_argument("solver.growth must exceed 1");
  if (!(c_max >= c0)) throw std::invalid_argument("solver.c_max must be at least c0");
  if (!(stop_tol > 0.0) || !(tol > 0.0) || !(floor_tol >= tol) || !(krylov_tol > 0.0))
    throw std::invalid_argument("solver tolerances must be positive");
  if (max_newton < 1 || max_total_newton < 0 || krylov_max < 1 || krylov_restart < 1 || max_halvings < 0)
    throw std::invalid_argument("solver iteration limits must be positive");
}

std::vector<double> ssn_residual(std::span<const double> u, std::span<const double> lambda, double C) {
  if (u.size() != lambda.size()) throw std::invalid_argument("ssn_residual: length mismatch");
  std::vector<double> phi(u.size());
  for (std::size_t k = 0; k < u.size(); ++k)
    phi[k] = u[k] - std::max(0.0, u[k] + C * (lambda[k] - 1.0)) - std::min(0.0, u[k] + C * (lambda[k] + 1.0));
  return phi;
}

ActiveSets active_sets(std::span<const double> u, std::span<const double> lambda, double C) {
  if (u.size() != lambda.size()) throw std::invalid_argument("active_sets: length mismatch");
  ActiveSets s;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k] + C * (lambda[k] - 1.0) > 0.0) s.plus.push_back(k);
    else if (u[k] + C * (lambda[k] + 1.0) < 0.0) s.minus.push_back(k);
    else s.inactive.push_back(k);
  }
  return s;
}

std::vector<double> jacobian_apply(const Problem& p, const AtomicMeasure& u, const StateTrajectory& y,
                                   const AdjointTrajectory& phi, double c, std::span<const double> d) {
  const AtomicMeasure v(u.grid(), std::vector<double>(d.begin(), d.end()));
  std::vector<double> w(d.size(), 0.0);
  if (std::any_of(d.begin(), d.end(), [](double x) { return x != 0.0; })) {
    const auto z = solve_linearized_state(p, u, y, v);
    const auto eta = solve_linearized_adjoint(p, u, y, phi, v, z);
    w = delay_gradient_derivative(p, y, phi, z, eta);
  }
  const double nu = p.nu();
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = -w[k] / nu;
    if (std::isfinite(c)) w[k] -= d[k] / (c * nu);
  }
  return w;
}

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

GmresResult gmres(const LinearOperator& a, std::span<const double> b, double tol, int max_iter,
                  int restart) {
  const std::size_t n = b.size();
  GmresResult out;
  out.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  std::vector<double> r(n), w(n);
  double resid = bnorm;
  while (out.iterations < max_iter) {
    a(out.x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const double beta = norm2(r);
    resid = beta;
    if (beta <= tol * bnorm) break;

    const int m = std::min(restart, max_iter - out.iterations);
    std::vector<std::vector<double>> v(1, r);
    for (double& x : v[0]) x /= beta;
    std::vector<std::vector<double>> h(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m), sn(m), g(m + 1, 0.0);
    g[0] = beta;
    int k = 0;
    for (int j = 0; j < m; ++j) {
      a(v[j], w);
      ++out.iterations;
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double hij = std::inner_product(w.begin(), w.end(), v[i].begin(), 0.0);
          h[i][j] += hij;
          for (std::size_t q = 0; q < n; ++q) w[q] -= hij * v[i][q];
        }
      }
      const double hn = norm2(w);
      h[j + 1][j] = hn;
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
        h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
        h[i][j] = t;
      }
      const double den = std::hypot(h[j][j], h[j + 1][j]);
      cs[j] = den == 0.0 ? 1.0 : h[j][j] / den;
      sn[j] = den == 0.0 ? 0.0 : h[j + 1][j] / den;
      h[j][j] = den;
      h[j + 1][j] = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      resid = std::abs(g[j + 1]);
      k = j + 1;
      if (resid <= tol * bnorm || hn <= 1e-14 * beta) break;
      v.emplace_back(w);
      for (double& x : v.back()) x /= hn;
    }
    std::vector<double> y(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int j = i + 1; j < k; ++j) s -= h[i][j] * y[j];
      y[i] = h[i][i] == 0.0 ? 0.0 : s / h[i][i];
    }
    for (int i = 0; i < k; ++i)
      for (std::size_t q = 0; q < n; ++q) out.x[q] += y[i] * v[i][q];
    if (resid <= tol * bnorm) {
      a(out.x, r);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
      resid = norm2(r);
      if (resid <= tol * bnorm) break;
    }
  }
  out.relative_residual = resid / bnorm;
  out.converged = out.relative_residual <= tol;
  return out;
}

namespace {

struct Iterate {
  std::vector<double> u;
  Evaluation ev;
  std::vector<double> lambda;
  std::vector<double> phi;
  double merit;
  double objective;  // F + nu |u|_1 + |u|^2 / (2c)
};

Iterate make_iterate(const Problem& p, const ControlGrid& grid, std::vector<double> u, double c) {
  const double nu = p.nu();
  const double C = c * nu;
  AtomicMeasure m(grid, u);
  auto ev = evaluate(p, m);
  std::vector<double> lambda(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) lambda[k] = -ev.g[k] / nu - u[k] / C;
  auto phi = ssn_residual(u, lambda, C);
  const double merit = norm2(phi);
  double objective = ev.F;
  for (double w : u) objective += nu * std::abs(w) + w * w / (2.0 * c);
  return Iterate{std::move(u), std::move(ev), std::move(lambda), std::move(phi), merit, objective};
}

// Proximal gradient step on the regularized objective. s backtracks until
// the sufficient decrease holds or the step is at rounding level, so the
// step size adapts to however stiff F is.
std::optional<Iterate> proximal_step(const Problem& p, const Iterate& cur, double c, double& s) {
  const double nu = p.nu();
  double scale = 0.0;
  for (double w : cur.u) scale = std::max(scale, std::abs(w));
  const double tiny = 1e-14 * (1.0 + scale);
  while (true) {
    std::vector<double> v(cur.u.size());
    double dist2 = 0.0, lin = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double a = cur.u[k] - s * cur.ev.g[k];
      const double shrunk = std::copysign(std::max(0.0, std::abs(a) - s * nu), a);
      v[k] = shrunk / (1.0 + s / c);
      dist2 += (v[k] - cur.u[k]) * (v[k] - cur.u[k]);
      lin += cur.ev.g[k] * (v[k] - cur.u[k]);
    }
    if (dist2 <= tiny * tiny) return std::nullopt;
    try {
      Iterate cand = make_iterate(p, p.control(), std::move(v), c);
      if (cand.ev.F <= cur.ev.F + lin + dist2 / (2.0 * s) && cand.objective < cur.objective) {
        s *= 2.0;
        return cand;
      }
    } catch (const SolverError&) {
    }
    s *= 0.5;
  }
}

constexpr int kMaxShifts = 8;

}  // namespace

SsnOutcome ssn_solve(const Problem& p, double c, const AtomicMeasure& u_init, const SsnSettings& settings) {
  if (!(u_init.grid() == p.control()))
    throw std::invalid_argument("ssn_solve: initial control is not on the problem's control grid");
  if (!(c > 0.0)) throw std::invalid_argument("ssn_solve: c must be positive");
  const double C = c * p.nu();
  const std::size_t K = u_init.size();
  SsnOutcome out{u_init, {}, false, false};

  Iterate cur = make_iterate(p, p.control(), {u_init.weights().begin(), u_init.weights().end()}, c);
  ActiveSets previous;
  int stalled = 0;
  double prox_s = 1.0;
  double shift = 0.0, mu0 = 0.0;
  for (int it = 0;; ++it) {
    const auto sets = active_sets(cur.u, cur.lambda, C);
    const double res = norm_inf(cur.phi);
    out.trace.push_back({c, it, res, total_variation(AtomicMeasure(p.control(), cur.u)), sets.plus.size(),
                         sets.minus.size()});
    const double scaled = res / ((1.0 + norm_inf(cur.u)) * std::max(1.0, C));
    if (scaled <= settings.tol) {
      out.converged = true;
      break;
    }
    // Rounding in the state, amplified by c, puts a floor under Phi. Stop
    // once the sets are settled and Newton no longer makes progress there.
    if (it > 0 && sets.plus == previous.plus && sets.minus == previous.minus && scaled <= settings.floor_tol &&
        stalled >= 3) {
      out.converged = true;
      break;
    }
    previous = sets;
    if (it >= settings.max_newton) break;

    const AtomicMeasure um(p.control(), cur.u);
    std::vector<std::size_t> idx(sets.plus);
    idx.insert(idx.end(), sets.minus.begin(), sets.minus.end());
    std::sort(idx.begin(), idx.end());
    std::vector<char> is_plus(K, 0);
    for (auto k : sets.plus) is_plus[k] = 1;

    std::vector<double> d_inactive(K, 0.0);
    bool any_inactive = false;
    for (auto k : sets.inactive) {
      d_inactive[k] = -cur.u[k];
      any_inactive = any_inactive || d_inactive[k] != 0.0;
    }
    std::vector<double> b(idx.size());
    if (!idx.empty()) {
      for (std::size_t a = 0; a < idx.size(); ++a) b[a] = (is_plus[idx[a]] ? 1.0 : -1.0) - cur.lambda[idx[a]];
      if (any_inactive) {
        const auto jd = jacobian_apply(p, um, cur.ev.y, cur.ev.phi, c, d_inactive);
        for (std::size_t a = 0; a < idx.size(); ++a) b[a] -= jd[idx[a]];
      }
    }

    // Newton direction for the active block, shifted by -mu/nu to push the
    // reduced Hessian towards positive definiteness when F is not convex.
    auto direction = [&](double mu) {
      std::vector<double> d = d_inactive;
      if (idx.empty()) return d;
      std::vector<double> full(K);
      LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
        std::fill(full.begin(), full.end(), 0.0);
        for (std::size_t a = 0; a < idx.size(); ++a) full[idx[a]] = x[a];
        const auto jx = jacobian_apply(p, um, cur.ev.y, cur.ev.phi, c, full);
        for (std::size_t a = 0; a < idx.size(); ++a) y[a] = jx[idx[a]] - mu / p.nu() * x[a];
      };
      auto sol = gmres(op, b, settings.krylov_tol, settings.krylov_max, settings.krylov_restart);
      if (!sol.converged) {
        // Steepest descent on 1/2 |J x - b|^2 from x = 0; J is symmetric.
        out.krylov_fallback = true;
        std::vector<double> jb(idx.size()), jjb(idx.size());
        op(b, jb);
        op(jb, jjb);
        const double den = std::inner_product(jjb.begin(), jjb.end(), jjb.begin(), 0.0);
        const double alpha = den > 0.0 ? std::inner_product(jb.begin(), jb.end(), jjb.begin(), 0.0) / den : 0.0;
        for (std::size_t a = 0; a < idx.size(); ++a) sol.x[a] = alpha * jb[a];
      }
      for (std::size_t a = 0; a < idx.size(); ++a) d[idx[a]] = sol.x[a];
      if (mu0 == 0.0) {
        const double xn = norm2(sol.x);
        if (xn > 0.0) mu0 = 1e-2 * p.nu() * norm2(b) / xn;
      }
      return d;
    };

    // Prefer steps that reduce |Phi|; otherwise settle for the longest step
    // that lowers the regularized objective.
    auto line_search = [&](const std::vector<double>& d, bool shifted) -> std::optional<Iterate> {
      const double slack = 1e-12 * std::abs(cur.objective);
      std::optional<Iterate> downhill;
      double alpha = 1.0;
      for (int halving = 0; halving <= settings.max_halvings; ++halving) {
        std::vector<double> trial(K);
        for (std::size_t k = 0; k < K; ++k) {
          trial[k] = cur.u[k] + alpha * d[k];
          // stop at zero instead of crossing it, so atoms can drop out exactly
          if (trial[k] * cur.u[k] < 0.0) trial[k] = 0.0;
        }
        if (alpha == 1.0)
          for (auto k : sets.inactive) trial[k] = 0.0;
        try {
          Iterate cand = make_iterate(p, p.control(), std::move(trial), c);
          if (shifted && cand.objective < cur.objective - slack) return cand;
          if (!shifted && cand.objective <= cur.objective + slack && cand.merit <= (1.0 - 1e-4 * alpha) * cur.merit)
            return cand;
          if (!downhill && cand.objective < cur.objective - slack) downhill = std::move(cand);
        } catch (const SolverError&) {
          // the state blew up at this trial point; shorten the step
        }
        alpha *= 0.5;
      }
      return downhill;
    };

    std::optional<Iterate> best;
    double mu = shift;
    for (int attempt = 0; attempt <= kMaxShifts; ++attempt) {
      best = line_search(direction(mu), mu > 0.0);
      if (best || mu0 == 0.0) break;
      mu = mu == 0.0 ? mu0 : 10.0 * mu;
    }
    shift = best && mu > mu0 ? mu / 10.0 : 0.0;
    if (!best) best = proximal_step(p, cur, c, prox_s);
    if (!best) {
      out.converged = scaled <= settings.floor_tol;
      break;
    }
    stalled = best->merit > 0.5 * cur.merit ? stalled + 1 : 0;
    cur = std::move(*best);
  }
  out.u = AtomicMeasure(p.control(), cur.u);
  return out;
}

SsnResult continuation_solve(const Problem& p, const SsnSettings& settings,
                             const std::optional<AtomicMeasure>& u_init) {
  settings.validate();
  AtomicMeasure u = u_init ? *u_init : AtomicMeasure(p.control());
  if (!(u.grid() == p.control()))
    throw std::invalid_argument("continuation_solve: initial control is not on the problem's control grid");
  SsnResult result{u, {}, {}, {}, settings.c0, true, false};
  bool first = true;
  // After a failed solve, retry from the last converged control with the
  // square root of the growth factor; the factor recovers after successes.
  const double min_ratio = std::pow(settings.growth, 1.0 / 16.0);
  double ratio = settings.growth;
  double c_prev = 0.0;
  double c = settings.c0;
  int budget = settings.max_total_newton > 0 ? settings.max_total_newton : -1;
  while (true) {
    auto level = settings;
    if (budget > 0) level.max_newton = std::min(level.max_newton, budget);
    auto step = ssn_solve(p, c, u, level);
    result.trace.insert(result.trace.end(), step.trace.begin(), step.trace.end());
    result.krylov_fallback = result.krylov_fallback || step.krylov_fallback;
    result.converged = step.converged;
    result.final_c = c;
    if (budget > 0) budget = std::max(0, budget - static_cast<int>(step.trace.size()));
    if (budget == 0) {
      u = std::move(step.u);
      result.converged = false;
      break;
    }
    if (!step.converged) {
      if (c_prev > 0.0 && ratio > min_ratio * (1.0 + 1e-12)) {
        ratio = std::sqrt(ratio);
        c = c_prev * ratio;
        continue;
      }
      u = std::move(step.u);
      break;
    }
    double diff = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) diff += std::abs(step.u.weight(k) - u.weight(k));
    const double prev_norm = total_variation(u);
    u = std::move(step.u);
    double shift = 0.0;
    for (double w : u.weights()) shift = std::max(shift, std::abs(w) / (c * p.nu()));
    if (first ? diff == 0.0 : diff <= settings.stop_tol * (1.0 + prev_norm) && shift <= 0.1 * settings.stop_tol)
      break;
    first = false;
    if (c >= settings.c_max * (1.0 - 1e-12)) break;
    c_prev = c;
    ratio = std::min(settings.growth, ratio * ratio);
    c = std::min(c * ratio, settings.c_max);
  }
  result.u = u;
  const auto ev = evaluate(p, u);
  result.report = optimality_report(p, u, compute_lambda(p, u, ev.y, ev.phi, result.final_c), ev.F,
                                    result.final_c);
  result.unregularized = optimality_report(p, u, compute_lambda(p, u, ev.y, ev.phi), ev.F);
  return result;
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  const auto old = out.precision(17);
  out << "c,newton_iter,residual_inf,norm_u,active_plus,active_minus\n";
  for (const auto& r : trace)
    out << r.c << ',' << r.newton_iter << ',' << r.residual_inf << ',' << r.norm_u << ','
        << r.active_plus << ',' << r.active_minus << '\n';
  out.precision(old);
}

}  // namespace delayopt
