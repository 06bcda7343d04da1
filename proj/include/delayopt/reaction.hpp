#pragma once

#include <array>
#include <vector>

namespace delayopt {

/// Polynomial reaction R(y) = sum_i a_i y^i.
///
/// Valid models have odd degree with a positive leading coefficient, or are
/// affine/constant; in both cases R' is bounded below.
class ReactionModel {
 public:
  explicit ReactionModel(std::vector<double> coeffs);

  /// R(y) = rho (y - y1)(y - y2)(y - y3) with rho > 0 and y1 < y2 < y3.
  static ReactionModel cubic(double rho, double y1, double y2, double y3);
  static ReactionModel zero() { return ReactionModel({0.0}); }

  const std::vector<double>& coefficients() const { return coeffs_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }

  /// R, R' or R'' at y (order 0, 1, 2).
  double eval(double y, int order = 0) const;

  /// inf over the real line of R'.
  double derivative_lower_bound() const;

 private:
  std::vector<double> coeffs_;
  std::array<std::vector<double>, 3> derivs_;
};

inline double reaction_eval(const ReactionModel& model, double y, int order) {
  return model.eval(y, order);
}

}  // namespace delayopt
