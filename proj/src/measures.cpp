#include "delayopt/measures.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace delayopt {

ControlGrid::ControlGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2)
    throw std::invalid_argument("control grid needs at least two nodes");
  if (nodes_.front() != 0.0)
    throw std::invalid_argument("control grid must start at t = 0");
  for (std::size_t k = 1; k < nodes_.size(); ++k) {
    if (!(nodes_[k] > nodes_[k - 1]))
      throw std::invalid_argument("control grid nodes must be strictly increasing");
  }
}

ControlGrid ControlGrid::uniform(double horizon, std::size_t intervals) {
  if (intervals == 0 || !(horizon > 0.0))
    throw std::invalid_argument("uniform control grid needs horizon > 0 and N >= 1");
  std::vector<double> nodes(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k)
    nodes[k] = horizon * static_cast<double>(k) / static_cast<double>(intervals);
  nodes.back() = horizon;
  return ControlGrid(std::move(nodes));
}

double ControlGrid::max_spacing() const {
  double tau = 0.0;
  for (std::size_t k = 1; k < nodes_.size(); ++k) tau = std::max(tau, nodes_[k] - nodes_[k - 1]);
  return tau;
}

std::size_t ControlGrid::bin_of(double s) const {
  // first node >= s; exact comparisons keep I_k right-closed
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), s);
  if (it == nodes_.end()) throw std::out_of_range("location beyond control horizon");
  return static_cast<std::size_t>(it - nodes_.begin());
}

AtomicMeasure::AtomicMeasure(ControlGrid grid)
    : grid_(std::move(grid)), weights_(grid_.size(), 0.0) {}

AtomicMeasure::AtomicMeasure(ControlGrid grid, std::vector<double> weights)
    : grid_(std::move(grid)), weights_(std::move(weights)) {
  if (weights_.size() != grid_.size())
    throw std::invalid_argument("atomic measure needs exactly one weight per grid node");
  for (double w : weights_) {
    if (!std::isfinite(w)) throw std::invalid_argument("atomic measure weight is not finite");
  }
}

AtomicMeasure AtomicMeasure::with_weights(std::vector<double> weights) const {
  return AtomicMeasure(grid_, std::move(weights));
}

GeneralMeasure::GeneralMeasure(double horizon, std::vector<Atom> atoms,
                               std::vector<DensityPiece> pieces)
    : horizon_(horizon), pieces_(std::move(pieces)) {
  if (!(horizon_ > 0.0)) throw std::invalid_argument("measure horizon must be positive");
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& l, const Atom& r) { return l.location < r.location; });
  for (const Atom& a : atoms) {
    if (!(a.location >= 0.0 && a.location <= horizon_))
      throw std::invalid_argument("atom location outside [0, horizon]");
    if (!atoms_.empty() && atoms_.back().location == a.location) {
      atoms_.back().weight += a.weight;
    } else {
      atoms_.push_back(a);
    }
  }
  std::erase_if(atoms_, [](const Atom& a) { return a.weight == 0.0; });

  std::sort(pieces_.begin(), pieces_.end(),
            [](const DensityPiece& l, const DensityPiece& r) { return l.a < r.a; });
  for (std::size_t p = 0; p < pieces_.size(); ++p) {
    const auto& d = pieces_[p];
    if (!(d.a < d.b)) throw std::invalid_argument("density piece must satisfy a < b");
    if (d.a < 0.0 || d.b > horizon_)
      throw std::invalid_argument("density piece outside [0, horizon]");
    if (p > 0 && pieces_[p - 1].b > d.a)
      throw std::invalid_argument("density pieces must not overlap");
  }
}

GeneralMeasure GeneralMeasure::from_atomic(const AtomicMeasure& u) {
  std::vector<Atom> atoms;
  atoms.reserve(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) atoms.push_back({u.location(k), u.weight(k)});
  return GeneralMeasure(u.grid().horizon(), std::move(atoms));
}

double GeneralMeasure::mass_at_zero() const {
  if (!atoms_.empty() && atoms_.front().location == 0.0) return atoms_.front().weight;
  return 0.0;
}

double GeneralMeasure::total_mass() const {
  double m = 0.0;
  for (const auto& a : atoms_) m += a.weight;
  for (const auto& d : pieces_) m += d.value * (d.b - d.a);
  return m;
}

double total_variation(const AtomicMeasure& m) {
  double tv = 0.0;
  for (double w : m.weights()) tv += std::abs(w);
  return tv;
}

double total_variation(const GeneralMeasure& m) {
  double tv = 0.0;
  for (const auto& a : m.atoms()) tv += std::abs(a.weight);
  for (const auto& d : m.pieces()) tv += std::abs(d.value) * (d.b - d.a);
  return tv;
}

AtomicMeasure project_onto_grid(const GeneralMeasure& m, const ControlGrid& grid) {
  if (m.horizon() > grid.horizon())
    throw std::invalid_argument("measure support exceeds the control grid");
  std::vector<double> w(grid.size(), 0.0);
  for (const auto& a : m.atoms()) w[grid.bin_of(a.location)] += a.weight;
  const auto nodes = grid.nodes();
  for (const auto& d : m.pieces()) {
    std::size_t k = std::max<std::size_t>(1, grid.bin_of(d.a));
    for (; k < nodes.size() && nodes[k - 1] < d.b; ++k) {
      const double overlap = std::min(nodes[k], d.b) - std::max(nodes[k - 1], d.a);
      if (overlap > 0.0) w[k] += d.value * overlap;
    }
  }
  return AtomicMeasure(grid, std::move(w));
}

double directional_derivative_j(const AtomicMeasure& u, const AtomicMeasure& v) {
  if (!(u.grid() == v.grid()))
    throw std::invalid_argument("directional derivative needs measures on one grid");
  double d = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double uk = u.weight(k);
    const double vk = v.weight(k);
    if (uk > 0.0) d += vk;
    else if (uk < 0.0) d -= vk;
    else d += std::abs(vk);
  }
  return d;
}

JordanParts jordan_decompose(const AtomicMeasure& u) {
  std::vector<double> pos(u.size(), 0.0);
  std::vector<double> neg(u.size(), 0.0);
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u.weight(k) > 0.0) pos[k] = u.weight(k);
    else if (u.weight(k) < 0.0) neg[k] = -u.weight(k);
  }
  return {u.with_weights(std::move(pos)), u.with_weights(std::move(neg))};
}

void write_measure_csv(std::ostream& out, const AtomicMeasure& u) {
  const auto old = out.precision(17);
  out << "t,weight\n";
  for (std::size_t k = 0; k < u.size(); ++k) out << u.location(k) << ',' << u.weight(k) << '\n';
  out.precision(old);
}

AtomicMeasure read_measure_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("control CSV is empty");
  if (line.rfind("t,weight", 0) != 0)
    throw std::runtime_error("control CSV must start with header 't,weight'");
  std::vector<double> t;
  std::vector<double> w;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    double a = 0.0;
    double b = 0.0;
    char comma = 0;
    if (!(row >> a >> comma >> b) || comma != ',')
      throw std::runtime_error("control CSV: malformed row at line " + std::to_string(lineno));
    t.push_back(a);
    w.push_back(b);
  }
  return AtomicMeasure(ControlGrid(std::move(t)), std::move(w));
}

}  // namespace delayopt
