#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "delayopt/fem.hpp"
#include "delayopt/measures.hpp"

namespace delayopt {

/// Dense row-major matrix of nodal values, one row per time node.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Trajectory&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// y_0(x, t) on Omega x [-T, 0].
class Prehistory {
 public:
  using Function = std::function<double(double x, double t)>;

  Prehistory(std::string family, Function f) : family_(std::move(family)), f_(std::move(f)) {}

  static Prehistory constant(double value);
  /// Traveling tanh front connecting the stable roots y1, y3 of the cubic.
  static Prehistory traveling_front(double y1, double y2, double y3);
  /// amplitude * cos^2(pi * frequency * t), constant in space.
  static Prehistory cosine_squared(double amplitude, double frequency);
  /// (a + b t) sin^2(pi (x - x_a) / L) on [x_a, x_a + L].
  static Prehistory affine_sin2(double a, double b, double xa, double length);

  const std::string& family() const { return family_; }
  double operator()(double x, double t) const { return f_(x, t); }
  void sample(const SpaceMesh& mesh, double t, std::span<double> out) const;
  std::vector<double> sample(const SpaceMesh& mesh, double t) const;

 private:
  std::string family_;
  Function f_;
};

/// Nodal values of y on the state time grid; y = y_0 for t < 0.
struct StateTrajectory {
  std::shared_ptr<const TimeGrid> time;
  std::shared_ptr<const SpaceMesh> mesh;
  std::shared_ptr<const Prehistory> history;  ///< null means zero prehistory
  Trajectory values;
};

/// Nodal values of the adjoint; zero on [T, 2T].
struct AdjointTrajectory {
  std::shared_ptr<const TimeGrid> time;
  Trajectory values;

  /// Linear interpolation in time, zero for t >= T.
  std::vector<double> sample(double t) const;
};

/// Nodal vector y(., t) for t in [-T, T]; linear in time between rows.
std::vector<double> sample_delayed(const StateTrajectory& traj, double t);

struct RowWeight {
  std::size_t row;
  double weight;
};

/// Linear functional int y(x, t - s) du(s) = sum_j w_j y_j + h, split into
/// trajectory rows and an already-evaluated prehistory part.
struct DelayStencil {
  std::vector<RowWeight> rows;  ///< merged, sorted by row
  std::vector<double> history;  ///< nodal; empty means zero

  double weight_on(std::size_t row) const;
  /// out += scale * (sum over rows except `skip_row` + history if requested)
  void apply(const Trajectory& y, std::span<double> out, double scale, bool with_history,
             std::size_t skip_row = static_cast<std::size_t>(-1)) const;
  void merge_rows();
};

/// Stencil of the delay term at time t in (0, T]. Densities use composite
/// trapezoid with breakpoints on the state grid (exact for the piecewise
/// linear in time trajectory); the negative-time part is subdivided with the
/// smallest state step.
DelayStencil delay_stencil(const GeneralMeasure& u, const TimeGrid& time, const SpaceMesh& mesh,
                           const Prehistory* history, double t);

struct DelaySource {
  double implicit_coeff;                ///< u({0}), multiplies y(., t)
  std::vector<double> explicit_part;    ///< all s > 0 contributions
};

/// Delay term at time t split as u({0}) y(t) + rest. The trajectory must hold
/// every row the rest touches.
DelaySource delay_source(const GeneralMeasure& u, const StateTrajectory& traj, double t);
DelaySource delay_source(const AtomicMeasure& u, const StateTrajectory& traj, double t);

/// (K*[u] phi)(t) = int_{[0, T - t)} phi(t + s) du(s), split like delay_source.
DelaySource adjoint_delay_source(const AtomicMeasure& u, const AdjointTrajectory& phi, double t);

}  // namespace delayopt
