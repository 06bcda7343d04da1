#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace delayopt {

/// 1-D mesh on [x_a, x_b] carrying continuous piecewise-linear elements.
class SpaceMesh {
 public:
  explicit SpaceMesh(std::vector<double> nodes);
  static SpaceMesh uniform(double xa, double xb, std::size_t nodes);

  std::span<const double> nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  double left() const { return nodes_.front(); }
  double right() const { return nodes_.back(); }
  double length() const { return right() - left(); }

 private:
  std::vector<double> nodes_;
};

/// State time nodes 0 = s_0 < ... < s_N = T.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> nodes);
  static TimeGrid uniform(double T, std::size_t steps);
  /// Steps growing geometrically away from t = 0; `ratio` is last step / first step.
  static TimeGrid graded(double T, std::size_t steps, double ratio);

  std::span<const double> nodes() const { return nodes_; }
  double operator[](std::size_t i) const { return nodes_[i]; }
  std::size_t steps() const { return nodes_.size() - 1; }
  double final_time() const { return nodes_.back(); }
  double step(std::size_t i) const { return nodes_[i] - nodes_[i - 1]; }
  double min_step() const;

  struct Location {
    std::size_t row;  ///< left node index j with s_j <= t
    double theta;     ///< weight of row j+1; 0 when t is a node
  };
  /// Interval containing t in [0, T]; nodes within a relative 1e-10 of a step
  /// snap exactly onto that node.
  Location locate(double t) const;

  /// Index of the node nearest to t.
  std::size_t nearest(double t) const;

 private:
  std::vector<double> nodes_;
};

/// Tridiagonal matrix with lower[i] = A(i, i-1), upper[i] = A(i, i+1).
struct Tridiagonal {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;

  explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
  std::size_t size() const { return diag.size(); }

  void multiply(std::span<const double> x, std::span<double> out) const;
  /// out += alpha * A x
  void multiply_add(double alpha, std::span<const double> x, std::span<double> out) const;
  Tridiagonal transposed() const;
};

/// Thomas algorithm; throws std::runtime_error on a zero pivot.
void solve_tridiagonal(const Tridiagonal& a, std::span<const double> rhs, std::span<double> x);

/// Consistent P1 mass matrix M and Neumann stiffness matrix A.
struct FemOperators {
  Tridiagonal mass;
  Tridiagonal stiffness;

  std::size_t size() const { return mass.size(); }
};

FemOperators assemble(const SpaceMesh& mesh);

/// a^T M b
double l2_inner(const FemOperators& ops, std::span<const double> a, std::span<const double> b);

}  // namespace delayopt
