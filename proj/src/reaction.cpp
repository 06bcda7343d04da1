#include "delayopt/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace delayopt {

namespace {

std::vector<double> differentiate(const std::vector<double>& c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = static_cast<double>(i) * c[i];
  return d;
}

double horner(const std::vector<double>& c, double y) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * y + *it;
  return v;
}

}  // namespace

ReactionModel::ReactionModel(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) coeffs_.push_back(0.0);
  while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
  for (double a : coeffs_) {
    if (!std::isfinite(a)) throw std::invalid_argument("reaction coefficient is not finite");
  }
  const int k = degree();
  if (k >= 2 && (k % 2 == 0 || coeffs_.back() <= 0.0))
    throw std::invalid_argument(
        "reaction polynomial must have odd degree and a positive leading coefficient");
  derivs_[0] = coeffs_;
  derivs_[1] = differentiate(derivs_[0]);
  derivs_[2] = differentiate(derivs_[1]);
}

ReactionModel ReactionModel::cubic(double rho, double y1, double y2, double y3) {
  if (!(rho > 0.0)) throw std::invalid_argument("cubic reaction needs rho > 0");
  if (!(y1 < y2 && y2 < y3)) throw std::invalid_argument("cubic reaction needs y1 < y2 < y3");
  // rho * (y^3 - e1 y^2 + e2 y - e3)
  const double e1 = y1 + y2 + y3;
  const double e2 = y1 * y2 + y1 * y3 + y2 * y3;
  const double e3 = y1 * y2 * y3;
  return ReactionModel({-rho * e3, rho * e2, -rho * e1, rho});
}

double ReactionModel::eval(double y, int order) const {
  if (order < 0 || order > 2) throw std::invalid_argument("reaction order must be 0, 1 or 2");
  return horner(derivs_[static_cast<std::size_t>(order)], y);
}

double ReactionModel::derivative_lower_bound() const {
  const int k = degree();
  if (k <= 1) return eval(0.0, 1);
  if (k == 3) {
    // R' is a convex parabola; vertex at -a2 / (3 a3)
    return eval(-coeffs_[2] / (3.0 * coeffs_[3]), 1);
  }
  // Critical points of R' are roots of R'', which lie inside the Cauchy bound.
  const auto& d2 = derivs_[2];
  double bound = 0.0;
  for (std::size_t i = 0; i + 1 < d2.size(); ++i) bound = std::max(bound, std::abs(d2[i] / d2.back()));
  bound += 1.0;
  const int samples = 4000;
  double best = eval(-bound, 1);
  double arg = -bound;
  for (int s = 1; s <= samples; ++s) {
    const double y = -bound + 2.0 * bound * s / samples;
    const double v = eval(y, 1);
    if (v < best) {
      best = v;
      arg = y;
    }
  }
  // golden-section refinement around the best sample
  const double h = 2.0 * bound / samples;
  double a = arg - h;
  double b = arg + h;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    if (eval(c, 1) < eval(d, 1)) b = d;
    else a = c;
  }
  return std::min(best, eval(0.5 * (a + b), 1));
}

}  // namespace delayopt
