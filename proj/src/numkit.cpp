#include "hippozoo/numkit.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace hippozoo::numkit {

SymEig sym_eig(const Mat& s) {
  require_square(s, "sym_eig");
  require_finite(s, "sym_eig");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > Tolerances::symmetry * scale)
    throw std::invalid_argument("sym_eig: input is not symmetric");
  if (s.rows() == 0) return {Vec(0), Mat(0, 0)};
  const Mat sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericError("sym_eig: solver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Svd svd(const Mat& m) {
  require_finite(m, "svd");
  Eigen::JacobiSVD<Mat> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

Mat solve_spd(const Mat& s, const Mat& rhs, double ridge, double floor_rel) {
  require_square(s, "solve_spd");
  if (rhs.rows() != s.rows()) throw std::invalid_argument("solve_spd: rhs row mismatch");
  if (ridge < 0) throw std::invalid_argument("solve_spd: ridge must be >= 0");
  require_finite(rhs, "solve_spd");
  SymEig eig = sym_eig(s);
  Vec lam = eig.values.array() + ridge;
  const double lmax = lam.cwiseAbs().maxCoeff();
  const double floor = floor_rel * lmax;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < floor || lam(i) <= 0) {
      if (ridge == 0.0)
        throw NumericError("solve_spd: matrix is indefinite or singular below the eigenvalue floor");
      lam(i) = std::max(floor, std::numeric_limits<double>::min());
    }
  }
  return eig.vectors * (lam.cwiseInverse().asDiagonal() * (eig.vectors.transpose() * rhs));
}

}  // namespace hippozoo::numkit
