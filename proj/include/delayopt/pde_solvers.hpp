#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "delayopt/delay_ops.hpp"
#include "delayopt/fem.hpp"
#include "delayopt/measures.hpp"
#include "delayopt/reaction.hpp"

namespace delayopt {

/// Inputs fully defining one instance of the control problem.
struct ProblemSpec {
  SpaceMesh mesh;
  TimeGrid time;
  ReactionModel reaction;
  Prehistory prehistory;
  Trajectory target;  ///< y_d at every (time node, space node)
  double nu = 1.0;
  double window_begin = 0.0;
  double window_end = 0.0;  ///< tracking window [begin, end], snapped to time nodes
  ControlGrid control;
  /// Optional extra right-hand side f(x, t) of the state equation. Test hook.
  Prehistory::Function forcing;
};

/// Nodal samples of f on every (time node, space node).
Trajectory sample_field(const SpaceMesh& mesh, const TimeGrid& time,
                        const std::function<double(double, double)>& f);

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (time step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Validated problem with assembled operators and the delay lookup table of
/// the control grid. Copies share the immutable parts.
class Problem {
 public:
  explicit Problem(ProblemSpec spec);

  const ProblemSpec& spec() const { return *spec_; }
  const SpaceMesh& mesh() const { return spec_->mesh; }
  const TimeGrid& time() const { return spec_->time; }
  const ControlGrid& control() const { return spec_->control; }
  const ReactionModel& reaction() const { return spec_->reaction; }
  const FemOperators& ops() const { return *ops_; }
  const Trajectory& target() const { return *target_; }
  double nu() const { return nu_; }
  std::size_t steps() const { return spec_->time.steps(); }

  /// Trapezoid weights of the tracking window on the time nodes.
  std::span<const double> tracking_weights() const { return weights_; }
  std::size_t window_first() const { return window_first_; }
  std::size_t window_last() const { return window_last_; }

  Problem with_nu(double nu) const;
  Problem with_target(Trajectory target) const;

  /// Per-step delay stencils at s_1 ... s_N; index 0 is unused.
  std::vector<DelayStencil> stencils(const AtomicMeasure& u) const;
  std::vector<DelayStencil> stencils(const GeneralMeasure& u) const;

  /// Lookup of Y(s_i - t_k) for control node k: rows (row, row+1) with weight
  /// theta on row+1, or a cached prehistory sample.
  struct TableEntry {
    std::size_t row = 0;
    double theta = 0.0;
    std::ptrdiff_t history = -1;
  };
  const TableEntry& entry(std::size_t step, std::size_t node) const;
  std::span<const double> history_sample(std::ptrdiff_t index) const;

  std::shared_ptr<const TimeGrid> time_ptr() const { return time_; }
  std::shared_ptr<const SpaceMesh> mesh_ptr() const { return mesh_; }
  std::shared_ptr<const Prehistory> history_ptr() const { return history_; }

 private:
  struct DelayTable;

  std::shared_ptr<const ProblemSpec> spec_;
  std::shared_ptr<const SpaceMesh> mesh_;
  std::shared_ptr<const TimeGrid> time_;
  std::shared_ptr<const Prehistory> history_;
  std::shared_ptr<const FemOperators> ops_;
  std::shared_ptr<const Trajectory> target_;
  std::shared_ptr<const DelayTable> table_;
  double nu_;
  std::vector<double> weights_;
  std::size_t window_first_ = 0;
  std::size_t window_last_ = 0;
};

/// dG(0)cG(1) state solve; damped Newton per step.
StateTrajectory solve_state(const Problem& p, const AtomicMeasure& u);
StateTrajectory solve_state(const Problem& p, const GeneralMeasure& u);

/// Backward adjoint sweep, the exact transpose of the linearized forward scheme.
AdjointTrajectory solve_adjoint(const Problem& p, const AtomicMeasure& u, const StateTrajectory& y);

/// z = G'(u) v with zero initial value and zero prehistory.
StateTrajectory solve_linearized_state(const Problem& p, const AtomicMeasure& u,
                                       const StateTrajectory& y, const AtomicMeasure& v);

/// Derivative of the adjoint in direction v, given z = G'(u) v.
AdjointTrajectory solve_linearized_adjoint(const Problem& p, const AtomicMeasure& u,
                                           const StateTrajectory& y, const AdjointTrajectory& phi,
                                           const AtomicMeasure& v, const StateTrajectory& z);

/// `t,x0,x1,...` header then one row per time node.
void write_trajectory_csv(std::ostream& out, const TimeGrid& time, const SpaceMesh& mesh,
                          const Trajectory& values);

}  // namespace delayopt
