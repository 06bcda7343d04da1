#include "delayopt/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace delayopt {

SpaceMesh::SpaceMesh(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 3) throw std::invalid_argument("space mesh needs at least 3 nodes");
  for (std::size_t j = 1; j < nodes_.size(); ++j) {
    if (!(nodes_[j] > nodes_[j - 1]))
      throw std::invalid_argument("space mesh nodes must be strictly increasing");
  }
}

SpaceMesh SpaceMesh::uniform(double xa, double xb, std::size_t nodes) {
  if (nodes < 3 || !(xb > xa)) throw std::invalid_argument("invalid uniform space mesh");
  std::vector<double> x(nodes);
  const double h = (xb - xa) / static_cast<double>(nodes - 1);
  for (std::size_t j = 0; j < nodes; ++j) x[j] = xa + h * static_cast<double>(j);
  x.back() = xb;
  return SpaceMesh(std::move(x));
}

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw std::invalid_argument("time grid needs at least one step");
  if (nodes_.front() != 0.0) throw std::invalid_argument("time grid must start at 0");
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (!(nodes_[i] > nodes_[i - 1]))
      throw std::invalid_argument("time grid nodes must be strictly increasing");
  }
}

TimeGrid TimeGrid::uniform(double T, std::size_t steps) {
  if (steps == 0 || !(T > 0.0)) throw std::invalid_argument("invalid uniform time grid");
  std::vector<double> s(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i)
    s[i] = T * static_cast<double>(i) / static_cast<double>(steps);
  s.back() = T;
  return TimeGrid(std::move(s));
}

TimeGrid TimeGrid::graded(double T, std::size_t steps, double ratio) {
  if (steps == 0 || !(T > 0.0) || !(ratio > 0.0)) throw std::invalid_argument("invalid graded time grid");
  if (steps == 1 || ratio == 1.0) return uniform(T, steps);
  const double q = std::pow(ratio, 1.0 / static_cast<double>(steps - 1));
  std::vector<double> s(steps + 1, 0.0);
  double h = 1.0;
  for (std::size_t i = 1; i <= steps; ++i) {
    s[i] = s[i - 1] + h;
    h *= q;
  }
  const double scale = T / s.back();
  for (double& v : s) v *= scale;
  s.back() = T;
  return TimeGrid(std::move(s));
}

double TimeGrid::min_step() const {
  double m = nodes_[1] - nodes_[0];
  for (std::size_t i = 2; i < nodes_.size(); ++i) m = std::min(m, nodes_[i] - nodes_[i - 1]);
  return m;
}

TimeGrid::Location TimeGrid::locate(double t) const {
  const double T = nodes_.back();
  if (t < 0.0 || t > T * (1.0 + 1e-14))
    throw std::out_of_range("time " + std::to_string(t) + " outside the state grid");
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  std::size_t j = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  if (j >= nodes_.size() - 1) return {nodes_.size() - 1, 0.0};
  const double h = nodes_[j + 1] - nodes_[j];
  double theta = (t - nodes_[j]) / h;
  const double snap = 1e-10;
  if (theta < snap) return {j, 0.0};
  if (theta > 1.0 - snap) return {j + 1, 0.0};
  return {j, theta};
}

std::size_t TimeGrid::nearest(double t) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
  if (it == nodes_.begin()) return 0;
  if (it == nodes_.end()) return nodes_.size() - 1;
  const auto hi = static_cast<std::size_t>(it - nodes_.begin());
  return (t - nodes_[hi - 1] <= nodes_[hi] - t) ? hi - 1 : hi;
}

void Tridiagonal::multiply(std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  multiply_add(1.0, x, out);
}

void Tridiagonal::multiply_add(double alpha, std::span<const double> x, std::span<double> out) const {
  const std::size_t n = diag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double v = diag[i] * x[i];
    if (i > 0) v += lower[i] * x[i - 1];
    if (i + 1 < n) v += upper[i] * x[i + 1];
    out[i] += alpha * v;
  }
}

Tridiagonal Tridiagonal::transposed() const {
  const std::size_t n = diag.size();
  Tridiagonal t(n);
  t.diag = diag;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    t.upper[i] = lower[i + 1];
    t.lower[i + 1] = upper[i];
  }
  return t;
}

void solve_tridiagonal(const Tridiagonal& a, std::span<const double> rhs, std::span<double> x) {
  const std::size_t n = a.size();
  std::vector<double> c(n, 0.0);
  double piv = a.diag[0];
  if (piv == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
  c[0] = n > 1 ? a.upper[0] / piv : 0.0;
  x[0] = rhs[0] / piv;
  for (std::size_t i = 1; i < n; ++i) {
    piv = a.diag[i] - a.lower[i] * c[i - 1];
    if (piv == 0.0 || !std::isfinite(piv)) throw std::runtime_error("tridiagonal solve: zero pivot");
    c[i] = i + 1 < n ? a.upper[i] / piv : 0.0;
    x[i] = (rhs[i] - a.lower[i] * x[i - 1]) / piv;
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
}

FemOperators assemble(const SpaceMesh& mesh) {
  const std::size_t n = mesh.size();
  const auto x = mesh.nodes();
  FemOperators ops{Tridiagonal(n), Tridiagonal(n)};
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double h = x[e + 1] - x[e];
    ops.mass.diag[e] += h / 3.0;
    ops.mass.diag[e + 1] += h / 3.0;
    ops.mass.upper[e] += h / 6.0;
    ops.mass.lower[e + 1] += h / 6.0;
    ops.stiffness.diag[e] += 1.0 / h;
    ops.stiffness.diag[e + 1] += 1.0 / h;
    ops.stiffness.upper[e] -= 1.0 / h;
    ops.stiffness.lower[e + 1] -= 1.0 / h;
  }
  return ops;
}

double l2_inner(const FemOperators& ops, std::span<const double> a, std::span<const double> b) {
  const std::size_t n = ops.size();
  if (a.size() != n || b.size() != n) throw std::invalid_argument("l2_inner: dimension mismatch");
  const auto& m = ops.mass;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mb = m.diag[i] * b[i];
    if (i > 0) mb += m.lower[i] * b[i - 1];
    if (i + 1 < n) mb += m.upper[i] * b[i + 1];
    s += a[i] * mb;
  }
  return s;
}

}  // namespace delayopt
