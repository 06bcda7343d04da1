#include "delayopt/pde_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace delayopt {

Trajectory sample_field(const SpaceMesh& mesh, const TimeGrid& time,
                        const std::function<double(double, double)>& f) {
  Trajectory out(time.steps() + 1, mesh.size());
  const auto x = mesh.nodes();
  for (std::size_t i = 0; i <= time.steps(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) out(i, j) = f(x[j], time[i]);
  }
  return out;
}

struct Problem::DelayTable {
  std::size_t nodes = 0;
  std::vector<TableEntry> entries;          // (step - 1) * nodes + k
  std::vector<std::vector<double>> history;  // prehistory samples
};

Problem::Problem(ProblemSpec spec) {
  if (!(spec.nu > 0.0)) throw std::invalid_argument("nu must be positive");
  if (!(spec.window_begin < spec.window_end))
    throw std::invalid_argument("tracking window must satisfy begin < end");
  const double T = spec.time.final_time();
  if (spec.window_begin < 0.0 || spec.window_end > T * (1.0 + 1e-12))
    throw std::invalid_argument("tracking window must lie inside [0, T]");
  if (spec.control.horizon() > T * (1.0 + 1e-12))
    throw std::invalid_argument("control horizon exceeds the state horizon T");
  if (spec.target.rows() != spec.time.steps() + 1 || spec.target.cols() != spec.mesh.size())
    throw std::invalid_argument("target samples do not match the space-time grid");

  nu_ = spec.nu;
  ops_ = std::make_shared<const FemOperators>(assemble(spec.mesh));
  target_ = std::make_shared<const Trajectory>(spec.target);
  mesh_ = std::make_shared<const SpaceMesh>(spec.mesh);
  time_ = std::make_shared<const TimeGrid>(spec.time);
  history_ = std::make_shared<const Prehistory>(spec.prehistory);

  window_first_ = spec.time.nearest(spec.window_begin);
  window_last_ = spec.time.nearest(spec.window_end);
  if (window_last_ <= window_first_)
    throw std::invalid_argument("tracking window collapses onto a single time node");
  weights_.assign(spec.time.steps() + 1, 0.0);
  for (std::size_t i = window_first_; i < window_last_; ++i) {
    const double h = spec.time.step(i + 1);
    weights_[i] += 0.5 * h;
    weights_[i + 1] += 0.5 * h;
  }

  auto table = std::make_shared<DelayTable>();
  const std::size_t K = spec.control.size();
  const std::size_t N = spec.time.steps();
  table->nodes = K;
  table->entries.resize(N * K);
  for (std::size_t i = 1; i <= N; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      double tau = spec.time[i] - spec.control[k];
      if (std::abs(tau) <= 1e-13 * T) tau = 0.0;
      TableEntry e;
      if (tau >= 0.0) {
        const auto loc = spec.time.locate(std::min(tau, T));
        e.row = loc.row;
        e.theta = loc.theta;
      } else {
        e.history = static_cast<std::ptrdiff_t>(table->history.size());
        table->history.push_back(spec.prehistory.sample(spec.mesh, tau));
      }
      table->entries[(i - 1) * K + k] = e;
    }
  }
  table_ = std::move(table);
  spec_ = std::make_shared<const ProblemSpec>(std::move(spec));
}

Problem Problem::with_nu(double nu) const {
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
  Problem p = *this;
  p.nu_ = nu;
  return p;
}

Problem Problem::with_target(Trajectory target) const {
  if (target.rows() != target_->rows() || target.cols() != target_->cols())
    throw std::invalid_argument("target samples do not match the space-time grid");
  Problem p = *this;
  p.target_ = std::make_shared<const Trajectory>(std::move(target));
  return p;
}

const Problem::TableEntry& Problem::entry(std::size_t step, std::size_t node) const {
  return table_->entries[(step - 1) * table_->nodes + node];
}

std::span<const double> Problem::history_sample(std::ptrdiff_t index) const {
  return table_->history[static_cast<std::size_t>(index)];
}

std::vector<DelayStencil> Problem::stencils(const AtomicMeasure& u) const {
  if (!(u.grid() == control())) return stencils(GeneralMeasure::from_atomic(u));
  const std::size_t N = steps();
  const std::size_t nx = mesh().size();
  std::vector<DelayStencil> out(N + 1);
  for (std::size_t i = 1; i <= N; ++i) {
    auto& st = out[i];
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double w = u.weight(k);
      if (w == 0.0) continue;
      const auto& e = entry(i, k);
      if (e.history >= 0) {
        if (st.history.empty()) st.history.assign(nx, 0.0);
        const auto h = history_sample(e.history);
        for (std::size_t j = 0; j < nx; ++j) st.history[j] += w * h[j];
      } else {
        st.rows.push_back({e.row, w * (1.0 - e.theta)});
        if (e.theta > 0.0) st.rows.push_back({e.row + 1, w * e.theta});
      }
    }
    st.merge_rows();
  }
  return out;
}

std::vector<DelayStencil> Problem::stencils(const GeneralMeasure& u) const {
  const std::size_t N = steps();
  std::vector<DelayStencil> out(N + 1);
  for (std::size_t i = 1; i <= N; ++i) out[i] = delay_stencil(u, time(), mesh(), history_.get(), time()[i]);
  return out;
}

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// M (1 - dt c) + dt A, the part of every step matrix independent of y.
Tridiagonal step_base(const FemOperators& ops, double dt, double implicit) {
  const std::size_t n = ops.size();
  Tridiagonal a(n);
  const double s = 1.0 - dt * implicit;
  for (std::size_t i = 0; i < n; ++i) {
    a.diag[i] = s * ops.mass.diag[i] + dt * ops.stiffness.diag[i];
    a.lower[i] = s * ops.mass.lower[i] + dt * ops.stiffness.lower[i];
    a.upper[i] = s * ops.mass.upper[i] + dt * ops.stiffness.upper[i];
  }
  return a;
}

/// a += dt * M diag(r)   (forward)   or   a += dt * diag(r) M   (transpose)
void add_reaction(Tridiagonal& a, const Tridiagonal& m, double dt, std::span<const double> r,
                  bool transpose) {
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    a.diag[i] += dt * m.diag[i] * r[i];
    if (transpose) {
      if (i > 0) a.lower[i] += dt * r[i] * m.lower[i];
      if (i + 1 < n) a.upper[i] += dt * r[i] * m.upper[i];
    } else {
      if (i > 0) a.lower[i] += dt * m.lower[i] * r[i - 1];
      if (i + 1 < n) a.upper[i] += dt * m.upper[i] * r[i + 1];
    }
  }
}

std::vector<double> reaction_derivative(const ReactionModel& R, std::span<const double> y, int order) {
  std::vector<double> r(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) r[j] = R.eval(y[j], order);
  return r;
}

StateTrajectory make_state(const Problem& p, bool with_history) {
  return StateTrajectory{p.time_ptr(), p.mesh_ptr(), with_history ? p.history_ptr() : nullptr,
                         Trajectory(p.steps() + 1, p.mesh().size())};
}

StateTrajectory forward_nonlinear(const Problem& p, const std::vector<DelayStencil>& st) {
  const auto& ops = p.ops();
  const auto& R = p.reaction();
  const auto& forcing = p.spec().forcing;
  const std::size_t n = p.mesh().size();
  const std::size_t N = p.steps();
  auto y = make_state(p, true);
  p.spec().prehistory.sample(p.mesh(), 0.0, y.values.row(0));

  std::vector<double> b(n), rhs(n), res(n), trial(n), delta(n), ry(n), trial_r(n);
  const double hmin = p.mesh().length() / static_cast<double>(n - 1);
  for (std::size_t i = 1; i <= N; ++i) {
    const double dt = p.time().step(i);
    const double c0 = st[i].weight_on(i);
    auto prev = y.values.row(i - 1);
    std::copy(prev.begin(), prev.end(), b.begin());
    st[i].apply(y.values, b, dt, true, i);
    if (forcing) {
      const auto x = p.mesh().nodes();
      for (std::size_t j = 0; j < n; ++j) b[j] += dt * forcing(x[j], p.time()[i]);
    }
    ops.mass.multiply(b, rhs);
    const Tridiagonal base = step_base(ops, dt, c0);

    auto cur = y.values.row(i);
    std::copy(prev.begin(), prev.end(), cur.begin());
    // Residual plus the magnitude of its largest term, the rounding floor.
    double scale = 0.0;
    auto residual = [&](std::span<const double> v, std::span<double> out) {
      for (std::size_t j = 0; j < n; ++j) ry[j] = R.eval(v[j], 0);
      base.multiply(v, out);
      scale = max_abs(rhs);
      for (std::size_t j = 0; j < n; ++j) {
        double row = std::abs(base.diag[j] * v[j]);
        if (j > 0) row += std::abs(base.lower[j] * v[j - 1]);
        if (j + 1 < n) row += std::abs(base.upper[j] * v[j + 1]);
        scale = std::max(scale, row);
      }
      std::fill(trial_r.begin(), trial_r.end(), 0.0);
      ops.mass.multiply_add(dt, ry, trial_r);
      scale = std::max({scale, max_abs(trial_r), hmin});
      for (std::size_t j = 0; j < n; ++j) out[j] += trial_r[j] - rhs[j];
    };
    residual(cur, res);
    double rnorm = max_abs(res);
    bool converged = rnorm <= 1e-12 * scale;
    auto newton_step = [&](bool polishing) {
      Tridiagonal jac = base;
      add_reaction(jac, ops.mass, dt, reaction_derivative(R, cur, 1), false);
      for (std::size_t j = 0; j < n; ++j) res[j] = -res[j];
      try {
        solve_tridiagonal(jac, res, delta);
      } catch (const std::runtime_error& e) {
        throw SolverError(std::string("state Newton: ") + e.what(), i);
      }
      double alpha = 1.0;
      double tnorm = 0.0;
      for (int halving = 0; halving <= (polishing ? 0 : 10); ++halving) {
        for (std::size_t j = 0; j < n; ++j) trial[j] = cur[j] + alpha * delta[j];
        residual(trial, res);
        tnorm = max_abs(res);
        if (tnorm < rnorm || tnorm <= 1e-12 * scale) break;
        alpha *= 0.5;
      }
      if (polishing && !(tnorm <= rnorm)) return;
      const double step = alpha * max_abs(delta);
      std::copy(trial.begin(), trial.end(), cur.begin());
      if (!std::isfinite(tnorm)) throw SolverError("state Newton diverged", i);
      rnorm = tnorm;
      converged = rnorm <= 1e-12 * scale || (alpha == 1.0 && step <= 1e-14 * (1.0 + max_abs(cur)));
    };
    for (int it = 0; it < 50 && !converged; ++it) newton_step(false);
    if (!converged) throw SolverError("state Newton did not converge in 50 iterations", i);
    // One more full step drives the residual to rounding level; derivatives
    // at large Tikhonov parameters amplify the remaining solver error.
    if (R.degree() >= 2 && rnorm > 0.0) newton_step(true);
  }
  return y;
}

/// (M + dt(A + M diag r - c M)) Z_i = M (Z_{i-1} + dt sum_{j<i} c_ij Z_j + dt q_i)
Trajectory forward_linear(const Problem& p, const Trajectory& y, const std::vector<DelayStencil>& st,
                          const std::function<void(std::size_t, std::span<double>)>& source) {
  const auto& ops = p.ops();
  const std::size_t n = p.mesh().size();
  const std::size_t N = p.steps();
  Trajectory z(N + 1, n);
  std::vector<double> b(n), rhs(n);
  for (std::size_t i = 1; i <= N; ++i) {
    const double dt = p.time().step(i);
    auto prev = z.row(i - 1);
    std::copy(prev.begin(), prev.end(), b.begin());
    st[i].apply(z, b, dt, false, i);
    if (source) source(i, b);
    ops.mass.multiply(b, rhs);
    Tridiagonal a = step_base(ops, dt, st[i].weight_on(i));
    add_reaction(a, ops.mass, dt, reaction_derivative(p.reaction(), y.row(i), 1), false);
    try {
      solve_tridiagonal(a, rhs, z.row(i));
    } catch (const std::runtime_error& e) {
      throw SolverError(std::string("linearized state: ") + e.what(), i);
    }
  }
  return z;
}

/// Transpose sweep: X_N = 0 and for j = N..1
/// (M + dt_j(A + diag(r_j) M - c_jj M)) X_{j-1} = M (X_j + acc_j) + src_j,
/// acc_l = sum_{i > l} dt_i c_il X_{i-1}. `source(j, X_{j-1} unknown)` adds src_j.
Trajectory backward_linear(const Problem& p, const Trajectory& y, const std::vector<DelayStencil>& st,
                           const std::function<void(std::size_t, std::span<double>)>& source) {
  const auto& ops = p.ops();
  const std::size_t n = p.mesh().size();
  const std::size_t N = p.steps();
  Trajectory x(N + 1, n);
  Trajectory acc(N + 1, n);
  std::vector<double> b(n), rhs(n);
  for (std::size_t j = N; j >= 1; --j) {
    const double dt = p.time().step(j);
    auto next = x.row(j);
    auto aj = acc.row(j);
    for (std::size_t a = 0; a < n; ++a) b[a] = next[a] + aj[a];
    ops.mass.multiply(b, rhs);
    if (source) source(j, rhs);
    Tridiagonal m = step_base(ops, dt, st[j].weight_on(j));
    add_reaction(m, ops.mass, dt, reaction_derivative(p.reaction(), y.row(j), 1), true);
    auto out = x.row(j - 1);
    try {
      solve_tridiagonal(m, rhs, out);
    } catch (const std::runtime_error& e) {
      throw SolverError(std::string("adjoint: ") + e.what(), j);
    }
    for (const auto& rw : st[j].rows) {
      if (rw.row >= j || rw.weight == 0.0) continue;
      auto target = acc.row(rw.row);
      const double w = dt * rw.weight;
      for (std::size_t a = 0; a < n; ++a) target[a] += w * out[a];
    }
  }
  return x;
}

}  // namespace

StateTrajectory solve_state(const Problem& p, const AtomicMeasure& u) {
  return forward_nonlinear(p, p.stencils(u));
}

StateTrajectory solve_state(const Problem& p, const GeneralMeasure& u) {
  return forward_nonlinear(p, p.stencils(u));
}

AdjointTrajectory solve_adjoint(const Problem& p, const AtomicMeasure& u, const StateTrajectory& y) {
  const auto st = p.stencils(u);
  const auto w = p.tracking_weights();
  const auto& yd = p.target();
  const std::size_t n = p.mesh().size();
  std::vector<double> e(n);
  auto source = [&](std::size_t j, std::span<double> rhs) {
    if (w[j] == 0.0) return;
    const auto yj = y.values.row(j);
    const auto dj = yd.row(j);
    for (std::size_t a = 0; a < n; ++a) e[a] = w[j] * (yj[a] - dj[a]);
    p.ops().mass.multiply_add(1.0, e, rhs);
  };
  return AdjointTrajectory{p.time_ptr(), backward_linear(p, y.values, st, source)};
}

StateTrajectory solve_linearized_state(const Problem& p, const AtomicMeasure& u,
                                       const StateTrajectory& y, const AtomicMeasure& v) {
  const auto st = p.stencils(u);
  const auto sv = p.stencils(v);
  auto source = [&](std::size_t i, std::span<double> b) {
    sv[i].apply(y.values, b, p.time().step(i), true);
  };
  auto z = make_state(p, false);
  z.values = forward_linear(p, y.values, st, source);
  return z;
}

AdjointTrajectory solve_linearized_adjoint(const Problem& p, const AtomicMeasure& u,
                                           const StateTrajectory& y, const AdjointTrajectory& phi,
                                           const AtomicMeasure& v, const StateTrajectory& z) {
  const auto st = p.stencils(u);
  const auto sv = p.stencils(v);
  const std::size_t n = p.mesh().size();
  const std::size_t N = p.steps();
  const auto w = p.tracking_weights();

  // accv_l = sum_{i >= l} dt_i c'_il phi_{i-1}
  Trajectory accv(N + 1, n);
  for (std::size_t i = 1; i <= N; ++i) {
    const double dt = p.time().step(i);
    const auto ph = phi.values.row(i - 1);
    for (const auto& rw : sv[i].rows) {
      if (rw.weight == 0.0) continue;
      auto target = accv.row(rw.row);
      for (std::size_t a = 0; a < n; ++a) target[a] += dt * rw.weight * ph[a];
    }
  }
  const bool curved = p.reaction().degree() >= 2;
  std::vector<double> b(n), mphi(n);
  auto source = [&](std::size_t j, std::span<double> rhs) {
    const auto zj = z.values.row(j);
    const auto aj = accv.row(j);
    for (std::size_t a = 0; a < n; ++a) b[a] = w[j] * zj[a] + aj[a];
    p.ops().mass.multiply_add(1.0, b, rhs);
    if (curved) {
      const double dt = p.time().step(j);
      p.ops().mass.multiply(phi.values.row(j - 1), mphi);
      const auto yj = y.values.row(j);
      for (std::size_t a = 0; a < n; ++a) rhs[a] -= dt * p.reaction().eval(yj[a], 2) * zj[a] * mphi[a];
    }
  };
  return AdjointTrajectory{p.time_ptr(), backward_linear(p, y.values, st, source)};
}

void write_trajectory_csv(std::ostream& out, const TimeGrid& time, const SpaceMesh& mesh,
                          const Trajectory& values) {
  const auto old = out.precision(17);
  out << 't';
  for (std::size_t j = 0; j < mesh.size(); ++j) out << ",x" << j;
  out << '\n';
  for (std::size_t i = 0; i < values.rows(); ++i) {
    out << time[i];
    for (std::size_t j = 0; j < values.cols(); ++j) out << ',' << values(i, j);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace delayopt
