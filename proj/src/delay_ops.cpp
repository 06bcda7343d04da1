#include "delayopt/delay_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace delayopt {

Prehistory Prehistory::constant(double value) {
  return Prehistory("constant", [value](double, double) { return value; });
}

Prehistory Prehistory::traveling_front(double y1, double y2, double y3) {
  const double speed = (y1 + y3 - 2.0 * y2) / std::numbers::sqrt2;
  const double slope = (y3 - y1) / (2.0 * std::numbers::sqrt2);
  return Prehistory("front", [=](double x, double t) {
    return 0.5 * (y1 + y3) + 0.5 * (y1 - y3) * std::tanh(slope * (x - speed * t));
  });
}

Prehistory Prehistory::cosine_squared(double amplitude, double frequency) {
  return Prehistory("cos2", [=](double, double t) {
    const double c = std::cos(std::numbers::pi * frequency * t);
    return amplitude * c * c;
  });
}

Prehistory Prehistory::affine_sin2(double a, double b, double xa, double length) {
  return Prehistory("affine_sin2", [=](double x, double t) {
    const double s = std::sin(std::numbers::pi * (x - xa) / length);
    return (a + b * t) * s * s;
  });
}

void Prehistory::sample(const SpaceMesh& mesh, double t, std::span<double> out) const {
  const auto x = mesh.nodes();
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = f_(x[j], t);
}

std::vector<double> Prehistory::sample(const SpaceMesh& mesh, double t) const {
  std::vector<double> v(mesh.size());
  sample(mesh, t, v);
  return v;
}

std::vector<double> AdjointTrajectory::sample(double t) const {
  std::vector<double> v(values.cols(), 0.0);
  const double T = time->final_time();
  if (t >= T) return v;
  if (t < 0.0) throw std::out_of_range("adjoint sampled before t = 0");
  const auto loc = time->locate(t);
  const auto r0 = values.row(loc.row);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = (1.0 - loc.theta) * r0[j];
  if (loc.theta > 0.0) {
    const auto r1 = values.row(loc.row + 1);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += loc.theta * r1[j];
  }
  return v;
}

std::vector<double> sample_delayed(const StateTrajectory& traj, double t) {
  const double T = traj.time->final_time();
  const double tol = 1e-14 * T;
  if (t < -T - tol || t > T + tol)
    throw std::out_of_range("sample_delayed: t = " + std::to_string(t) + " outside [-T, T]");
  const std::size_t n = traj.values.cols();
  std::vector<double> v(n, 0.0);
  if (t < 0.0) {
    if (traj.history) traj.history->sample(*traj.mesh, t, v);
    return v;
  }
  const auto loc = traj.time->locate(std::min(t, T));
  const auto r0 = traj.values.row(loc.row);
  for (std::size_t j = 0; j < n; ++j) v[j] = (1.0 - loc.theta) * r0[j];
  if (loc.theta > 0.0) {
    const auto r1 = traj.values.row(loc.row + 1);
    for (std::size_t j = 0; j < n; ++j) v[j] += loc.theta * r1[j];
  }
  return v;
}

double DelayStencil::weight_on(std::size_t row) const {
  for (const auto& rw : rows) {
    if (rw.row == row) return rw.weight;
  }
  return 0.0;
}

void DelayStencil::apply(const Trajectory& y, std::span<double> out, double scale,
                         bool with_history, std::size_t skip_row) const {
  const std::size_t n = out.size();
  for (const auto& rw : rows) {
    if (rw.row == skip_row || rw.weight == 0.0) continue;
    const auto r = y.row(rw.row);
    const double w = scale * rw.weight;
    for (std::size_t j = 0; j < n; ++j) out[j] += w * r[j];
  }
  if (with_history && !history.empty()) {
    for (std::size_t j = 0; j < n; ++j) out[j] += scale * history[j];
  }
}

void DelayStencil::merge_rows() {
  std::sort(rows.begin(), rows.end(),
            [](const RowWeight& a, const RowWeight& b) { return a.row < b.row; });
  std::vector<RowWeight> merged;
  merged.reserve(rows.size());
  for (const auto& rw : rows) {
    if (!merged.empty() && merged.back().row == rw.row) merged.back().weight += rw.weight;
    else merged.push_back(rw);
  }
  rows = std::move(merged);
}

namespace {

class StencilBuilder {
 public:
  StencilBuilder(const TimeGrid& time, const SpaceMesh& mesh, const Prehistory* history)
      : time_(time), mesh_(mesh), history_(history), scratch_(mesh.size()) {}

  /// adds weight * Y(tau)
  void add(double tau, double weight) {
    if (weight == 0.0) return;
    const double T = time_.final_time();
    if (std::abs(tau) <= 1e-13 * T) tau = 0.0;
    if (tau >= 0.0) {
      const auto loc = time_.locate(std::min(tau, T));
      out_.rows.push_back({loc.row, weight * (1.0 - loc.theta)});
      if (loc.theta > 0.0) out_.rows.push_back({loc.row + 1, weight * loc.theta});
      return;
    }
    if (tau < -T * (1.0 + 1e-14)) throw std::out_of_range("delay reaches before -T");
    if (!history_) return;
    if (out_.history.empty()) out_.history.assign(mesh_.size(), 0.0);
    history_->sample(mesh_, tau, scratch_);
    for (std::size_t j = 0; j < scratch_.size(); ++j) out_.history[j] += weight * scratch_[j];
  }

  DelayStencil finish() {
    out_.merge_rows();
    return std::move(out_);
  }

 private:
  const TimeGrid& time_;
  const SpaceMesh& mesh_;
  const Prehistory* history_;
  std::vector<double> scratch_;
  DelayStencil out_;
};

void add_density(StencilBuilder& b, const TimeGrid& time, const DensityPiece& d, double t) {
  // integrate over tau = t - s in [t - b, t - a]
  const double lo = t - d.b;
  const double hi = t - d.a;
  std::vector<double> pts{lo, hi};
  const auto nodes = time.nodes();
  for (double s : nodes) {
    if (s > lo && s < hi) pts.push_back(s);
  }
  if (lo < 0.0 && hi > 0.0) pts.push_back(0.0);
  if (lo < 0.0) {
    const double h = time.min_step();
    const double top = std::min(hi, 0.0);
    const auto pieces = static_cast<std::size_t>(std::ceil((top - lo) / h));
    for (std::size_t p = 1; p < pieces; ++p) pts.push_back(lo + (top - lo) * p / pieces);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
    const double w = 0.5 * d.value * (pts[p + 1] - pts[p]);
    b.add(pts[p], w);
    b.add(pts[p + 1], w);
  }
}

}  // namespace

DelayStencil delay_stencil(const GeneralMeasure& u, const TimeGrid& time, const SpaceMesh& mesh,
                           const Prehistory* history, double t) {
  if (u.horizon() > time.final_time() * (1.0 + 1e-14))
    throw std::invalid_argument("control horizon exceeds the state horizon");
  StencilBuilder b(time, mesh, history);
  for (const auto& a : u.atoms()) b.add(t - a.location, a.weight);
  for (const auto& d : u.pieces()) add_density(b, time, d, t);
  return b.finish();
}

namespace {

GeneralMeasure without_zero_atom(const GeneralMeasure& u) {
  std::vector<Atom> atoms;
  for (const auto& a : u.atoms()) {
    if (a.location != 0.0) atoms.push_back(a);
  }
  return GeneralMeasure(u.horizon(), std::move(atoms), {u.pieces().begin(), u.pieces().end()});
}

}  // namespace

DelaySource delay_source(const GeneralMeasure& u, const StateTrajectory& traj, double t) {
  if (!(t > 0.0) || t > traj.time->final_time() * (1.0 + 1e-14))
    throw std::out_of_range("delay_source: t must lie in (0, T]");
  const auto rest = without_zero_atom(u);
  const auto stencil = delay_stencil(rest, *traj.time, *traj.mesh, traj.history.get(), t);
  DelaySource src{u.mass_at_zero(), std::vector<double>(traj.values.cols(), 0.0)};
  stencil.apply(traj.values, src.explicit_part, 1.0, true);
  return src;
}

DelaySource delay_source(const AtomicMeasure& u, const StateTrajectory& traj, double t) {
  return delay_source(GeneralMeasure::from_atomic(u), traj, t);
}

DelaySource adjoint_delay_source(const AtomicMeasure& u, const AdjointTrajectory& phi, double t) {
  const double T = phi.time->final_time();
  if (t < 0.0 || !(t < T)) throw std::out_of_range("adjoint_delay_source: t must lie in [0, T)");
  DelaySource src{u.weight(0), std::vector<double>(phi.values.cols(), 0.0)};
  for (std::size_t k = 1; k < u.size(); ++k) {
    const double tk = u.location(k);
    const double wk = u.weight(k);
    // integration domain [0, T - t) is open at the right end
    if (wk == 0.0 || !(tk < T - t)) continue;
    const auto v = phi.sample(t + tk);
    for (std::size_t j = 0; j < v.size(); ++j) src.explicit_part[j] += wk * v[j];
  }
  return src;
}

}  // namespace delayopt
