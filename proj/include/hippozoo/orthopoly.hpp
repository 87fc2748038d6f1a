#pragma once

// Orthonormal polynomial families on an interval: closed-form shifted
// Legendre, Stieltjes-built families for custom weights, Jacobi matrices and
// reproducing-kernel evaluation.

#include "hippozoo/numkit.hpp"

#include <functional>
#include <string>

namespace hippozoo {

/// Gauss-type rule: sum_i weights[i] f(nodes[i]) ~ integral of f (times weight).
struct Quadrature {
  Vec nodes;
  Vec weights;

  double integrate(const std::function<double(double)>& f) const;
  double mass() const { return weights.sum(); }
};

/// Q-node Gauss-Legendre rule on [lo, hi]; exact for degree <= 2Q-1.
Quadrature gauss_legendre(int q, double lo, double hi);

/// Measure density on an interval.
struct Weight {
  enum class Kind { Uniform, Jeffreys, Custom };
  Kind kind = Kind::Uniform;
  std::function<double(double)> density;  // only for Custom
  std::string label = "uniform";

  static Weight uniform() { return {}; }
  /// density 1/x; the interval must lie in (0, inf).
  static Weight jeffreys() { return {Kind::Jeffreys, nullptr, "jeffreys"}; }
  static Weight custom(std::function<double(double)> f, std::string label = "custom") {
    return {Kind::Custom, std::move(f), std::move(label)};
  }
  double operator()(double x) const;
};

/// Quadrature for `weight` on [lo, hi] with at least q nodes; weights include
/// the density. Jeffreys uses geometrically graded Gauss-Legendre panels so
/// the 1/x growth near lo is resolved; each panel is exact for polynomials of
/// degree <= 2*min_panel_nodes - 1.
Quadrature weighted_quadrature(const Weight& weight, double lo, double hi, int q,
                               int min_panel_nodes = 0);

/// Orthonormal polynomials P_0..P_{M-1} in Favard form
///   x p_n = a_{n+1} p_{n+1} + b_n p_n + a_n p_{n-1},  a_n > 0,
/// where p_n has positive leading coefficient. The exposed family is
/// P_n = orientation[n] * p_n.
class OrthoBasis {
 public:
  OrthoBasis(int order, double lo, double hi, double mass, Vec a, Vec b,
             Eigen::VectorXi orientation, std::string label);

  int order() const { return order_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double mass() const { return mass_; }
  const std::string& label() const { return label_; }
  /// a(n) for n = 1..order-1 stored at index n; a(0) unused (0).
  const Vec& a() const { return a_; }
  const Vec& b() const { return b_; }
  const Eigen::VectorXi& orientation() const { return orientation_; }
  bool contains(double x) const { return x >= lo_ && x <= hi_; }

 private:
  int order_;
  double lo_, hi_, mass_;
  Vec a_, b_;
  Eigen::VectorXi orientation_;
  std::string label_;
};

/// L_n(s) = sqrt(2n+1) (-1)^n P_n(2s-1) on [0,1]; s = 0 is the present.
OrthoBasis legendre_shifted(int order);

/// Orthonormal family for `weight` on [lo, hi] by the discretized Stieltjes
/// procedure. q <= 0 selects max(4*order, 256) nodes.
OrthoBasis stieltjes_basis(const Weight& weight, double lo, double hi, int order, int q = 0);

/// [P_0(x), ..., P_{M-1}(x)] by forward recurrence. Points outside the
/// interval extrapolate; callers decide whether to clamp.
Vec eval_basis(const OrthoBasis& basis, double x);

/// Values and first derivatives at x.
void eval_basis_with_derivative(const OrthoBasis& basis, double x, Vec& values, Vec& derivs);

/// Row i holds eval_basis(basis, xs[i]).
Mat eval_basis(const OrthoBasis& basis, const Vec& xs);

/// Symmetric tridiagonal matrix of multiplication by x in the oriented basis.
Mat jacobi_matrix(const OrthoBasis& basis);

/// Truncated reproducing kernel K(x, y) = phi(x)^T phi(y).
double reproducing_kernel(const OrthoBasis& basis, double x, double y);

/// Gram matrix <P_i, P_j> under a quadrature rule.
Mat gram_matrix(const OrthoBasis& basis, const Quadrature& rule);

/// Kolmogorov distance between the empirical CDF of `samples` and the
/// arcsine (equilibrium) law on [lo, hi].
double arcsine_kolmogorov_distance(const Vec& samples, double lo, double hi);

}  // namespace hippozoo
