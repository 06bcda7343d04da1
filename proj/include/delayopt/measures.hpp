#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace delayopt {

/// Nodes 0 = t_0 < t_1 < ... < t_N = T_c of the control discretization.
class ControlGrid {
 public:
  explicit ControlGrid(std::vector<double> nodes);

  /// N equal intervals on [0, horizon].
  static ControlGrid uniform(double horizon, std::size_t intervals);

  std::span<const double> nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t intervals() const { return nodes_.size() - 1; }
  double horizon() const { return nodes_.back(); }
  double operator[](std::size_t k) const { return nodes_[k]; }
  double max_spacing() const;

  /// Index k of the half-open bin I_k = (t_{k-1}, t_k] holding `s`; I_0 = {0}.
  std::size_t bin_of(double s) const;

  bool operator==(const ControlGrid&) const = default;

 private:
  std::vector<double> nodes_;
};

/// Discrete control sum_k u_k delta_{t_k}, one weight per grid node.
class AtomicMeasure {
 public:
  explicit AtomicMeasure(ControlGrid grid);
  AtomicMeasure(ControlGrid grid, std::vector<double> weights);

  const ControlGrid& grid() const { return grid_; }
  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t k) const { return weights_[k]; }
  double location(std::size_t k) const { return grid_[k]; }
  std::size_t size() const { return weights_.size(); }

  AtomicMeasure with_weights(std::vector<double> weights) const;

 private:
  ControlGrid grid_;
  std::vector<double> weights_;
};

struct Atom {
  double location;
  double weight;
};

/// Constant density `value` (mass per unit time) on [a, b].
struct DensityPiece {
  double a;
  double b;
  double value;
};

/// Atoms plus piecewise-constant densities on [0, horizon].
///
/// Atoms sharing a location are merged and zero atoms are dropped. Density
/// pieces must be non-degenerate and pairwise non-overlapping, so the total
/// variation is the plain sum of |weight| and |value| * length.
class GeneralMeasure {
 public:
  GeneralMeasure(double horizon, std::vector<Atom> atoms,
                 std::vector<DensityPiece> pieces = {});

  static GeneralMeasure from_atomic(const AtomicMeasure& u);

  double horizon() const { return horizon_; }
  std::span<const Atom> atoms() const { return atoms_; }
  std::span<const DensityPiece> pieces() const { return pieces_; }

  /// Mass of the atom at s = 0.
  double mass_at_zero() const;
  /// u([0, horizon]).
  double total_mass() const;

 private:
  double horizon_;
  std::vector<Atom> atoms_;
  std::vector<DensityPiece> pieces_;
};

double total_variation(const AtomicMeasure& m);
double total_variation(const GeneralMeasure& m);

/// Lambda_tau: weight at node k is m(I_k) with I_k = (t_{k-1}, t_k], I_0 = {0}.
AtomicMeasure project_onto_grid(const GeneralMeasure& m, const ControlGrid& grid);

/// One-sided directional derivative j'(u; v) of the total variation norm for
/// atomic measures sharing one grid. Throws std::invalid_argument otherwise.
double directional_derivative_j(const AtomicMeasure& u, const AtomicMeasure& v);

struct JordanParts {
  AtomicMeasure positive;
  AtomicMeasure negative;
};

JordanParts jordan_decompose(const AtomicMeasure& u);

/// `t,weight` rows, 17 significant digits.
void write_measure_csv(std::ostream& out, const AtomicMeasure& u);
AtomicMeasure read_measure_csv(std::istream& in);

}  // namespace delayopt
