#include "hippozoo/orthopoly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hippozoo {

double Quadrature::integrate(const std::function<double(double)>& f) const {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i) acc += weights(i) * f(nodes(i));
  return acc;
}

Quadrature gauss_legendre(int q, double lo, double hi) {
  if (q < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("gauss_legendre: degenerate interval");
  Vec x(q), w(q);
  const double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
  const int m = (q + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Newton on P_q from the Chebyshev-like initial guess.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= q; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = q * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // one more evaluation at the converged root for the weight
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= q; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = q * (z * p0 - p1) / (z * z - 1.0);
    const double wt = 2.0 / ((1.0 - z * z) * dp * dp);
    x(i) = mid - half * z;
    x(q - 1 - i) = mid + half * z;
    w(i) = w(q - 1 - i) = half * wt;
  }
  if (q % 2 == 1) x(m - 1) = mid;
  return {x, w};
}

double Weight::operator()(double x) const {
  switch (kind) {
    case Kind::Uniform: return 1.0;
    case Kind::Jeffreys: return 1.0 / x;
    case Kind::Custom: return density(x);
  }
  return 0.0;
}

namespace {

Quadrature concat(const std::vector<Quadrature>& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.nodes.size();
  Quadrature out{Vec(total), Vec(total)};
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.nodes.segment(at, p.nodes.size()) = p.nodes;
    out.weights.segment(at, p.nodes.size()) = p.weights;
    at += p.nodes.size();
  }
  return out;
}

}  // namespace

Quadrature weighted_quadrature(const Weight& weight, double lo, double hi, int q,
                               int min_panel_nodes) {
  if (!(hi > lo)) throw std::invalid_argument("weighted_quadrature: degenerate interval");
  if (q < 1) throw std::invalid_argument("weighted_quadrature: need at least one node");
  switch (weight.kind) {
    case Weight::Kind::Uniform:
      return gauss_legendre(std::max(q, min_panel_nodes), lo, hi);
    case Weight::Kind::Jeffreys: {
      if (!(lo > 0)) throw std::invalid_argument("weighted_quadrature: Jeffreys weight needs lo > 0");
      const int panels = std::max(1, static_cast<int>(std::ceil(std::log2(hi / lo))));
      const int per = std::max((q + panels - 1) / panels, min_panel_nodes);
      const double ratio = std::pow(hi / lo, 1.0 / panels);
      std::vector<Quadrature> parts;
      double a = lo;
      for (int p = 0; p < panels; ++p) {
        const double b = (p + 1 == panels) ? hi : a * ratio;
        Quadrature g = gauss_legendre(per, a, b);
        for (Eigen::Index i = 0; i < g.nodes.size(); ++i) g.weights(i) /= g.nodes(i);
        parts.push_back(std::move(g));
        a = b;
      }
      return concat(parts);
    }
    case Weight::Kind::Custom: {
      const int panels = 8;
      const int per = std::max((q + panels - 1) / panels, min_panel_nodes);
      std::vector<Quadrature> parts;
      for (int p = 0; p < panels; ++p) {
        const double a = lo + (hi - lo) * p / panels;
        const double b = lo + (hi - lo) * (p + 1) / panels;
        Quadrature g = gauss_legendre(per, a, b);
        for (Eigen::Index i = 0; i < g.nodes.size(); ++i) {
          const double d = weight.density(g.nodes(i));
          if (!(d >= 0) || !std::isfinite(d))
            throw std::invalid_argument("weighted_quadrature: custom density must be finite and >= 0");
          g.weights(i) *= d;
        }
        parts.push_back(std::move(g));
      }
      return concat(parts);
    }
  }
  throw std::logic_error("weighted_quadrature: unknown weight");
}

OrthoBasis::OrthoBasis(int order, double lo, double hi, double mass, Vec a, Vec b,
                       Eigen::VectorXi orientation, std::string label)
    : order_(order),
      lo_(lo),
      hi_(hi),
      mass_(mass),
      a_(std::move(a)),
      b_(std::move(b)),
      orientation_(std::move(orientation)),
      label_(std::move(label)) {
  if (order_ < 1) throw std::invalid_argument("OrthoBasis: order must be >= 1");
  if (a_.size() != order_ || b_.size() != order_ || orientation_.size() != order_)
    throw std::invalid_argument("OrthoBasis: coefficient arrays must have length order");
  if (!(mass_ > 0)) throw std::invalid_argument("OrthoBasis: mass must be positive");
  for (int n = 1; n < order_; ++n)
    if (!(a_(n) > 0)) throw NumericError("OrthoBasis: recurrence coefficient a_n not positive");
}

OrthoBasis legendre_shifted(int order) {
  if (order < 1) throw std::invalid_argument("legendre_shifted: order must be >= 1");
  Vec a = Vec::Zero(order), b = Vec::Constant(order, 0.5);
  Eigen::VectorXi orient(order);
  for (int n = 0; n < order; ++n) {
    if (n > 0) a(n) = n / (2.0 * std::sqrt(4.0 * n * n - 1.0));
    orient(n) = (n % 2 == 0) ? 1 : -1;
  }
  return OrthoBasis(order, 0.0, 1.0, 1.0, a, b, orient, "legendre_shifted");
}

OrthoBasis stieltjes_basis(const Weight& weight, double lo, double hi, int order, int q) {
  if (order < 1) throw std::invalid_argument("stieltjes_basis: order must be >= 1");
  if (q <= 0) q = std::max(4 * order, 256);
  if (q < 4 * order) throw std::invalid_argument("stieltjes_basis: need q >= 4*order");
  // Panels must integrate p_i p_j (degree <= 2*order-2) exactly.
  const Quadrature rule = weighted_quadrature(weight, lo, hi, q, order + 8);
  const Vec& x = rule.nodes;
  const Vec& w = rule.weights;
  const double mass = w.sum();
  if (!(mass > 0)) throw NumericError("stieltjes_basis: weight has no mass");

  Vec a = Vec::Zero(order), b = Vec::Zero(order);
  Vec p_prev = Vec::Zero(x.size());
  Vec p = Vec::Constant(x.size(), 1.0 / std::sqrt(mass));
  for (int n = 0; n < order; ++n) {
    b(n) = (w.array() * x.array() * p.array().square()).sum();
    if (n + 1 == order) break;
    Vec next = (x.array() - b(n)) * p.array() - a(n) * p_prev.array();
    // one reorthogonalization pass against the two previous members
    next -= (w.array() * next.array() * p.array()).sum() * p;
    if (n > 0) next -= (w.array() * next.array() * p_prev.array()).sum() * p_prev;
    const double norm = std::sqrt((w.array() * next.array().square()).sum());
    if (!(norm > 0) || !std::isfinite(norm))
      throw NumericError("stieltjes_basis: lost positivity of a_n; increase quadrature order");
    a(n + 1) = norm;
    p_prev = std::move(p);
    p = next / norm;
  }
  return OrthoBasis(order, lo, hi, mass, a, b, Eigen::VectorXi::Ones(order),
                    "stieltjes_" + weight.label);
}

Vec eval_basis(const OrthoBasis& basis, double x) {
  const int m = basis.order();
  const Vec& a = basis.a();
  const Vec& b = basis.b();
  Vec out(m);
  double prev = 0.0, cur = 1.0 / std::sqrt(basis.mass());
  out(0) = cur;
  for (int n = 0; n + 1 < m; ++n) {
    const double next = ((x - b(n)) * cur - a(n) * prev) / a(n + 1);
    prev = cur;
    cur = next;
    out(n + 1) = cur;
  }
  return out.cwiseProduct(basis.orientation().cast<double>());
}

void eval_basis_with_derivative(const OrthoBasis& basis, double x, Vec& values, Vec& derivs) {
  const int m = basis.order();
  const Vec& a = basis.a();
  const Vec& b = basis.b();
  values.resize(m);
  derivs.resize(m);
  double prev = 0.0, cur = 1.0 / std::sqrt(basis.mass());
  double dprev = 0.0, dcur = 0.0;
  values(0) = cur;
  derivs(0) = 0.0;
  for (int n = 0; n + 1 < m; ++n) {
    const double next = ((x - b(n)) * cur - a(n) * prev) / a(n + 1);
    const double dnext = (cur + (x - b(n)) * dcur - a(n) * dprev) / a(n + 1);
    prev = cur;
    cur = next;
    dprev = dcur;
    dcur = dnext;
    values(n + 1) = cur;
    derivs(n + 1) = dcur;
  }
  const Vec sign = basis.orientation().cast<double>();
  values.array() *= sign.array();
  derivs.array() *= sign.array();
}

Mat eval_basis(const OrthoBasis& basis, const Vec& xs) {
  Mat out(xs.size(), basis.order());
  for (Eigen::Index i = 0; i < xs.size(); ++i) out.row(i) = eval_basis(basis, xs(i)).transpose();
  return out;
}

Mat jacobi_matrix(const OrthoBasis& basis) {
  const int m = basis.order();
  Mat j = Mat::Zero(m, m);
  const auto& s = basis.orientation();
  for (int n = 0; n < m; ++n) {
    j(n, n) = basis.b()(n);
    if (n + 1 < m) j(n, n + 1) = j(n + 1, n) = s(n) * s(n + 1) * basis.a()(n + 1);
  }
  return j;
}

double reproducing_kernel(const OrthoBasis& basis, double x, double y) {
  return eval_basis(basis, x).dot(eval_basis(basis, y));
}

Mat gram_matrix(const OrthoBasis& basis, const Quadrature& rule) {
  const Mat phi = eval_basis(basis, rule.nodes);
  return phi.transpose() * rule.weights.asDiagonal() * phi;
}

double arcsine_kolmogorov_distance(const Vec& samples, double lo, double hi) {
  std::vector<double> v(samples.data(), samples.data() + samples.size());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
    const double f = 2.0 / std::numbers::pi * std::asin(std::sqrt(t));
    worst = std::max({worst, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  return worst;
}

}  // namespace hippozoo
