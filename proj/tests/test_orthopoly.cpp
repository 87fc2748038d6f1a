#include "doctest.h"
#include "oracles.hpp"

#include "hippozoo/orthopoly.hpp"

using namespace hippozoo;

TEST_CASE("gauss_legendre integrates polynomials up to degree 2Q-1 exactly") {
  const Quadrature q = gauss_legendre(6, -1.0, 2.0);
  for (int k = 0; k <= 11; ++k) {
    const double exact = (std::pow(2.0, k + 1) - std::pow(-1.0, k + 1)) / (k + 1);
    CHECK(q.integrate([k](double x) { return std::pow(x, k); }) == doctest::Approx(exact).epsilon(1e-13));
  }
  CHECK(q.mass() == doctest::Approx(3.0));
  CHECK_THROWS_AS(gauss_legendre(0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gauss_legendre(3, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("legendre_shifted matches the std::legendre closed form") {
  const OrthoBasis b = legendre_shifted(24);
  for (double s : {0.0, 0.1, 0.37, 0.5, 0.93, 1.0}) {
    const Vec v = eval_basis(b, s);
    for (int n = 0; n < 24; ++n) CHECK(v(n) == doctest::Approx(oracle::shifted_legendre(n, s)).epsilon(1e-11));
  }
  // s = 0 is the present: L_n(0) = sqrt(2n+1).
  const Vec at0 = eval_basis(b, 0.0);
  for (int n = 0; n < 24; ++n) CHECK(at0(n) == doctest::Approx(std::sqrt(2.0 * n + 1)));
}

TEST_CASE("legendre_shifted is orthonormal on [0,1]") {
  const OrthoBasis b = legendre_shifted(40);
  const Mat g = gram_matrix(b, gauss_legendre(60, 0.0, 1.0));
  CHECK((g - Mat::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Stieltjes with the uniform weight reproduces Legendre up to orientation") {
  const OrthoBasis st = stieltjes_basis(Weight::uniform(), 0.0, 1.0, 20);
  const OrthoBasis ref = legendre_shifted(20);
  for (double s : {0.05, 0.4, 0.8}) {
    const Vec a = eval_basis(st, s), b = eval_basis(ref, s);
    for (int n = 0; n < 20; ++n) CHECK(std::abs(a(n)) == doctest::Approx(std::abs(b(n))).epsilon(1e-10));
  }
}

TEST_CASE("Jeffreys basis is orthonormal under an independent quadrature") {
  const double eps = 1e-3;
  const int m = 12;
  const OrthoBasis b = stieltjes_basis(Weight::jeffreys(), eps, 1.0, m);
  CHECK(b.mass() == doctest::Approx(-std::log(eps)).epsilon(1e-12));
  // Simpson in u = log x turns the 1/x weight into a uniform one.
  for (int i = 0; i < m; i += 3) {
    for (int j = i; j < m; j += 2) {
      const double ip = oracle::simpson(
          [&](double u) {
            const Vec v = eval_basis(b, std::exp(u));
            return v(i) * v(j);
          },
          std::log(eps), 0.0, 40000);
      CHECK(ip == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8).scale(1.0));
    }
  }
}

TEST_CASE("custom weight families are orthonormal") {
  const Weight w = Weight::custom([](double x) { return 1.0 + x * x; }, "1+x^2");
  const OrthoBasis b = stieltjes_basis(w, -1.0, 1.0, 10);
  const Mat g = gram_matrix(b, weighted_quadrature(w, -1.0, 1.0, 64));
  CHECK((g - Mat::Identity(10, 10)).cwiseAbs().maxCoeff() < numkit::Tolerances::orthonormality);
  CHECK(b.mass() == doctest::Approx(2.0 + 2.0 / 3.0));
}

TEST_CASE("Jacobi matrix eigenvalues are the Gauss nodes") {
  const OrthoBasis b = legendre_shifted(10);
  const Mat j = jacobi_matrix(b);
  CHECK((j - j.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Vec ev = numkit::sym_eig(j).values;
  Vec nodes = gauss_legendre(10, 0.0, 1.0).nodes;
  std::sort(nodes.data(), nodes.data() + nodes.size());
  CHECK((ev - nodes).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("Jacobi matrix represents multiplication by x") {
  const OrthoBasis b = stieltjes_basis(Weight::jeffreys(), 0.01, 1.0, 8);
  const Mat j = jacobi_matrix(b);
  // x phi(x) = J phi(x) in all but the last (truncated) component.
  for (double x : {0.02, 0.3, 0.9}) {
    const Vec phi = eval_basis(b, x);
    const Vec lhs = x * phi, rhs = j * phi;
    CHECK((lhs - rhs).head(7).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("reproducing kernel reproduces polynomials of degree < M") {
  const OrthoBasis b = legendre_shifted(8);
  const Quadrature q = gauss_legendre(16, 0.0, 1.0);
  auto p = [](double y) { return 1.0 - 2.0 * y + 3.0 * y * y * y - y * y * y * y * y * y * y; };
  for (double x : {0.0, 0.33, 0.7, 1.0}) {
    const double v = q.integrate([&](double y) { return reproducing_kernel(b, x, y) * p(y); });
    CHECK(v == doctest::Approx(p(x)).epsilon(1e-12));
  }
  CHECK(reproducing_kernel(b, 0.3, 0.6) == doctest::Approx(reproducing_kernel(b, 0.6, 0.3)));
}

TEST_CASE("basis derivatives match finite differences") {
  const OrthoBasis b = legendre_shifted(12);
  Vec v, d;
  const double x = 0.41, h = 1e-6;
  eval_basis_with_derivative(b, x, v, d);
  const Vec fd = (eval_basis(b, x + h) - eval_basis(b, x - h)) / (2 * h);
  CHECK((d - fd).cwiseAbs().maxCoeff() < 1e-5 * d.cwiseAbs().maxCoeff());
  CHECK((v - eval_basis(b, x)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Jacobi spectra follow the arcsine law") {
  const OrthoBasis b = legendre_shifted(256);
  CHECK(arcsine_kolmogorov_distance(numkit::sym_eig(jacobi_matrix(b)).values, 0.0, 1.0) < 0.05);
  // Jeffreys weight has the same equilibrium law on its interval.
  const OrthoBasis j = stieltjes_basis(Weight::jeffreys(), 1e-3, 1.0, 128);
  CHECK(arcsine_kolmogorov_distance(numkit::sym_eig(jacobi_matrix(j)).values, 1e-3, 1.0) < 0.1);
  // Uniform samples are far from arcsine.
  const Vec uniform = Vec::LinSpaced(1000, 0.0, 1.0);
  CHECK(arcsine_kolmogorov_distance(uniform, 0.0, 1.0) > 0.05);
}

TEST_CASE("basis construction errors") {
  CHECK_THROWS_AS(legendre_shifted(0), std::invalid_argument);
  CHECK_THROWS_AS(stieltjes_basis(Weight::uniform(), 1.0, 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(stieltjes_basis(Weight::jeffreys(), 0.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(stieltjes_basis(Weight::uniform(), 0.0, 1.0, 8, 10), std::invalid_argument);
}
