#pragma once

// Dense real kernels shared by every module: matrix exponential, zero-order
// hold discretization, symmetric eigendecomposition, thin SVD and
// regularized SPD solves. Everything here is a pure function of its inputs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace hippozoo {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Raised when a kernel produces or receives non-finite values.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace numkit {

/// Tolerances used by the kernels, collected in one record.
struct Tolerances {
  static constexpr double symmetry = 1e-10;        // sym_eig / solve_spd input check
  static constexpr double spd_floor_rel = 1e-12;   // eigenvalue floor, relative to max |lambda|
  static constexpr double orthonormality = 1e-10;  // factor checks in tests
  static constexpr double reconstruction = 1e-8;   // residual checks in tests
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols())
    throw std::invalid_argument(std::string(what) + ": matrix must be square, got " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) throw NumericError(std::string(what) + ": non-finite entries");
}

namespace detail {

// [13/13] Pade numerator/denominator split as (V + U)(V - U)^{-1}.
template <typename Scalar>
void pade13(const MatrixX<Scalar>& a, MatrixX<Scalar>& u, MatrixX<Scalar>& v) {
  static constexpr long double b[] = {64764752532480000.L, 32382376266240000.L,
                                      7771770303897600.L,  1187353796428800.L,
                                      129060195264000.L,   10559470521600.L,
                                      670442572800.L,      33522128640.L,
                                      1323241920.L,        40840800.L,
                                      960960.L,            16380.L,
                                      182.L,               1.L};
  const auto n = a.rows();
  const MatrixX<Scalar> id = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> a2 = a * a;
  const MatrixX<Scalar> a4 = a2 * a2;
  const MatrixX<Scalar> a6 = a4 * a2;
  auto c = [](long double x) { return static_cast<Scalar>(x); };
  MatrixX<Scalar> tmp = c(b[13]) * a6 + c(b[11]) * a4 + c(b[9]) * a2;
  MatrixX<Scalar> inner = a6 * tmp;
  inner += c(b[7]) * a6 + c(b[5]) * a4 + c(b[3]) * a2 + c(b[1]) * id;
  u.noalias() = a * inner;
  tmp = c(b[12]) * a6 + c(b[10]) * a4 + c(b[8]) * a2;
  v.noalias() = a6 * tmp;
  v += c(b[6]) * a6 + c(b[4]) * a4 + c(b[2]) * a2 + c(b[0]) * id;
}

}  // namespace detail

/// exp(t*A) by scaling and squaring with the [13/13] Pade approximant.
template <typename Derived>
MatrixX<typename Derived::Scalar> mat_exp(const Eigen::MatrixBase<Derived>& a,
                                          typename Derived::Scalar t = 1) {
  using Scalar = typename Derived::Scalar;
  require_square(a, "mat_exp");
  require_finite(a, "mat_exp");
  if (!std::isfinite(static_cast<double>(t))) throw NumericError("mat_exp: non-finite t");
  const auto n = a.rows();
  if (n == 0) return MatrixX<Scalar>(0, 0);

  MatrixX<Scalar> scaled = t * a;
  const double norm1 = static_cast<double>(scaled.cwiseAbs().colwise().sum().maxCoeff());
  constexpr double theta13 = 5.371920351148152;
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    scaled /= std::ldexp(Scalar(1), squarings);
  }
  MatrixX<Scalar> u(n, n), v(n, n);
  detail::pade13(scaled, u, v);
  MatrixX<Scalar> result = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) result = (result * result).eval();
  require_finite(result, "mat_exp");
  return result;
}

/// Zero-order-hold discretization of ds/dt = A s + b f.
template <typename Scalar>
struct Zoh {
  MatrixX<Scalar> a_d;
  VectorX<Scalar> b_d;
};

/// A_d = exp(dt A), b_d = int_0^dt exp(sA) ds b, both read off the augmented
/// exponential exp(dt [[A, b], [0, 0]]) so singular A is fine.
template <typename DerivedA, typename DerivedB>
Zoh<typename DerivedA::Scalar> zoh_discretize(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b,
                                              typename DerivedA::Scalar dt) {
  using Scalar = typename DerivedA::Scalar;
  require_square(a, "zoh_discretize");
  if (b.size() != a.rows())
    throw std::invalid_argument("zoh_discretize: dim(b) != dim(A)");
  if (!(dt > 0)) throw std::invalid_argument("zoh_discretize: dt must be > 0");
  const auto n = a.rows();
  MatrixX<Scalar> aug = MatrixX<Scalar>::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a;
  aug.topRightCorner(n, 1) = b;
  const MatrixX<Scalar> e = mat_exp(aug, dt);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

/// Symmetric eigendecomposition, eigenvalues ascending, orthonormal columns.
struct SymEig {
  Vec values;
  Mat vectors;
};

SymEig sym_eig(const Mat& s);

/// Thin SVD: M = U diag(sigma) V^T with sigma descending.
struct Svd {
  Mat u;
  Vec sigma;
  Mat v;
};

Svd svd(const Mat& m);

/// (S + ridge I)^{-1} B through the eigendecomposition of S. Eigenvalues of
/// S + ridge I below floor_rel * max|lambda| raise unless ridge > 0, in which
/// case they are clamped to the floor.
Mat solve_spd(const Mat& s, const Mat& rhs, double ridge = 0.0,
              double floor_rel = Tolerances::spd_floor_rel);

/// f(S) = V f(Lambda) V^T for symmetric S.
template <typename F>
Mat sym_apply(const SymEig& eig, F&& f) {
  Vec fv = eig.values.unaryExpr(std::forward<F>(f));
  return eig.vectors * fv.asDiagonal() * eig.vectors.transpose();
}

/// Max-norm of (a - b); handy for tolerance checks.
template <typename DA, typename DB>
double max_abs_diff(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.size() == 0) return 0.0;
  return static_cast<double>((a - b).cwiseAbs().maxCoeff());
}

}  // namespace numkit
}  // namespace hippozoo
